"""Monte Carlo engine for two-sided stable and reflected Brownian processes.

The central primitive evaluates a process with stationary independent
symmetric-stable increments (plus linear drift) jointly at an arbitrary
finite time set: insert 0 into the sorted times, draw one increment per
sorted gap with law ``r*g + sigma * g**(1/alpha) * S`` (S a standard
symmetric stable draw), prefix-sum, and anchor the value at time 0 to 0.
Increments across 0 combine exactly like same-side ones because
symmetric stable parts aggregate by the stability relation and drifts
add linearly, so a single sorted pass realizes the two-sided law.

Rows of a 2-d time array are treated as independent replications; all
draws come from the single generator passed in, so results are
reproducible from (seed, shapes) alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BROWNIAN, StableParams
from .errors import InvalidInput, InvalidParameter, UnsupportedRegime

_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class RandomStream:
    """Reproducible random source identified by (seed, stream_id).

    Identical identifiers yield bitwise-identical draw sequences across
    runs and platforms.  Distinct stream_ids give statistically
    independent streams for the same seed.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        )

    def substream(self, stream_id: int) -> "RandomStream":
        return RandomStream(self.seed, stream_id)


@dataclass(frozen=True)
class EvalRequest:
    """A process marker plus the times it should be evaluated at.

    ``params`` is a :class:`StableParams`, or None for the reflected
    Brownian motion, in which case all times must be nonnegative.
    """

    params: StableParams | None
    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if not np.all(np.isfinite(times)):
            raise InvalidInput("times must be finite")
        if self.params is None and times.size and times.min() < 0.0:
            raise InvalidInput("reflected process requires nonnegative times")


# ---------------------------------------------------------------------------
# stable draws


def sample_stable_standard(alpha: float, rng: np.random.Generator, size=None):
    """Standard symmetric stable draw(s): characteristic function
    exp(-|u|**alpha).

    alpha = 2 is Gaussian with variance 2; alpha = 1 is standard Cauchy;
    other indices use the polar (uniform angle, exponential) method.
    """
    if not (0.0 < alpha <= 2.0):
        raise InvalidParameter("alpha must lie in (0, 2]")
    if alpha == 2.0:
        return rng.normal(0.0, math.sqrt(2.0), size)
    if alpha == 1.0:
        return rng.standard_cauchy(size)
    u = rng.uniform(-math.pi / 2.0, math.pi / 2.0, size)
    w = rng.standard_exponential(size)
    return (
        np.sin(alpha * u)
        / np.cos(u) ** (1.0 / alpha)
        * (np.cos((1.0 - alpha) * u) / w) ** ((1.0 - alpha) / alpha)
    )


def _gap_increments(g: np.ndarray, params: StableParams, rng) -> np.ndarray:
    """Increments over nonnegative gaps; a zero gap yields exactly 0."""
    draws = sample_stable_standard(params.alpha, rng, g.shape)
    inc = params.sigma * g ** (1.0 / params.alpha) * draws
    if params.r != 0.0:
        inc += params.r * g
    return inc


# ---------------------------------------------------------------------------
# joint evaluation at finite time sets


def _eval_batch(times: np.ndarray, params: StableParams, rng) -> np.ndarray:
    """(S, N) times -> (S, N) jointly distributed values, X(0) = 0."""
    s, n = times.shape
    aug = np.concatenate([times, np.zeros((s, 1))], axis=1)
    order = np.argsort(aug, axis=1, kind="stable")
    sorted_t = np.take_along_axis(aug, order, axis=1)
    # overflow to inf is tolerated here: divergent regimes saturate on purpose
    with np.errstate(over="ignore", invalid="ignore"):
        inc = _gap_increments(np.diff(sorted_t, axis=1), params, rng)
        partial = np.concatenate([np.zeros((s, 1)), np.cumsum(inc, axis=1)], axis=1)
        inv = np.empty_like(order)
        np.put_along_axis(
            inv, order, np.broadcast_to(np.arange(n + 1), (s, n + 1)), axis=1
        )
        anchored = partial - np.take_along_axis(partial, inv[:, -1:], axis=1)
    return np.take_along_axis(anchored, inv[:, :n], axis=1)


def eval_process_at(times, params: StableParams, rng: np.random.Generator):
    """Evaluate the two-sided process jointly at the requested times.

    ``times`` may be (N,) or (S, N); rows are independent replications.
    Duplicate times share a value; a requested time 0 maps to exactly 0.
    """
    t = np.asarray(times, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidInput("times must be finite")
    if t.ndim == 1:
        return _eval_batch(t[None, :], params, rng)[0]
    if t.ndim != 2:
        raise InvalidInput("times must be 1-d or 2-d")
    return _eval_batch(t, params, rng)


def eval_reflected_at(times, rng: np.random.Generator):
    """Reflected Brownian motion at nonnegative times: |BM| evaluation."""
    t = np.asarray(times, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidInput("times must be finite")
    if t.size and t.min() < 0.0:
        raise InvalidInput("reflected process requires nonnegative times")
    return np.abs(eval_process_at(t, BROWNIAN, rng))


def eval_request(req: EvalRequest, rng: np.random.Generator):
    if req.params is None:
        return eval_reflected_at(req.times, rng)
    return eval_process_at(req.times, req.params, rng)


# ---------------------------------------------------------------------------
# iteration


def _saturate(values: np.ndarray) -> np.ndarray:
    # inf - inf inside a prefix sum has no meaningful sign; keep it as an
    # overflow marker rather than an error (divergence is the object of study)
    return np.where(np.isnan(values), np.inf, values)


def _iterate_level(x, params, rng, reflected):
    finite = np.isfinite(x)
    if finite.all():
        out = _eval_batch(x, params, rng)
    else:
        out = _eval_batch(np.where(finite, x, 0.0), params, rng)
        out = np.where(finite, out, x)  # saturated coordinates stay put
    out = _saturate(out)
    return np.abs(out) if reflected else out


def iterate_fdd(
    times,
    depth: int,
    params: StableParams,
    rng: np.random.Generator,
    reflected: bool = False,
):
    """Feed the evaluation into itself ``depth`` times.

    Rows of a 2-d input iterate independently (one fresh process per row
    per level).  Values that overflow to +-inf are carried through
    untouched; callers can count them with ``np.isfinite``.
    """
    if depth < 0:
        raise InvalidParameter("depth must be >= 0")
    t = np.asarray(times, dtype=float)
    if not np.all(np.isfinite(t)):
        raise InvalidInput("times must be finite")
    if reflected and t.size and t.min() < 0.0:
        raise InvalidInput("reflected iteration requires nonnegative start times")
    single = t.ndim == 1
    x = np.atleast_2d(t).copy()
    for level_rng in rng.spawn(depth):
        x = _iterate_level(x, params, level_rng, reflected)
    return x[0] if single else x


def overflow_count(values) -> int:
    return int(np.size(values) - np.count_nonzero(np.isfinite(values)))


# ---------------------------------------------------------------------------
# gap chain, product formula, range, occupation


def gaps_chain_step(g, params: StableParams, rng: np.random.Generator):
    """One step of the gap chain: evaluate at a time set realizing the
    gaps (sorted representative) and return the gaps of the values.

    ``g`` may be (k,) or (S, k); the output law depends on g only.
    """
    gv = np.asarray(g, dtype=float)
    single = gv.ndim == 1
    gv = np.atleast_2d(gv)
    if np.any(gv <= 0.0) or not np.all(np.isfinite(gv)):
        raise InvalidParameter("gaps must be finite and strictly positive")
    times = np.cumsum(gv, axis=1)
    vals = _eval_batch(times, params, rng)
    full = np.concatenate([np.zeros((gv.shape[0], 1)), vals], axis=1)
    out = np.diff(np.sort(full, axis=1), axis=1)
    return out[0] if single else out


def product_formula_sample(
    alpha: float,
    m_trunc: int,
    rng: np.random.Generator,
    sigma: float = 1.0,
    size: int | None = None,
):
    """Signed geometric-exponent product of independent |X(1)| draws.

    Factor i carries exponent alpha**-i, so truncation error decays
    geometrically; requires alpha > 1 (drift-free regime).
    """
    if alpha <= 1.0:
        raise UnsupportedRegime("product representation requires alpha > 1")
    if m_trunc < 1:
        raise InvalidParameter("m_trunc must be >= 1")
    n = 1 if size is None else int(size)
    draws = sample_stable_standard(alpha, rng, (n, m_trunc))
    exps = alpha ** -np.arange(m_trunc)
    logs = np.log(np.abs(sigma * draws)) @ exps
    signs = rng.integers(0, 2, n) * 2.0 - 1.0
    out = signs * np.exp(logs)
    return float(out[0]) if size is None else out


def range_sample(
    params: StableParams,
    depth: int,
    t: float,
    grid_size: int,
    rng: np.random.Generator,
    size: int | None = None,
):
    """Grid approximation of the running range of the depth-n iterate.

    Evaluates the iterate on ``grid_size`` uniform points spanning
    [0, t] and returns max - min; the grid bias is not corrected.
    """
    if not (params.alpha > 1.0 and abs(params.r) < 1.0):
        raise InvalidParameter("range law requires alpha > 1 and |r| < 1")
    if t == 0.0:
        raise InvalidParameter("t must be nonzero")
    if grid_size < 2:
        raise InvalidParameter("grid_size must be >= 2")
    n = 1 if size is None else int(size)
    grid = np.linspace(0.0, t, grid_size)
    out = np.empty(n)
    chunk = max(1, _CHUNK_ELEMENTS // grid_size)
    done = 0
    while done < n:
        m = min(chunk, n - done)
        vals = iterate_fdd(np.tile(grid, (m, 1)), depth, params, rng)
        out[done : done + m] = vals.max(axis=1) - vals.min(axis=1)
        done += m
    return float(out[0]) if size is None else out


@dataclass(frozen=True)
class Histogram:
    """Equal-width histogram of process values over [0, 1] occupation."""

    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    n_points: int
    n_outside: int


def occupation_histogram(
    params: StableParams,
    depth: int,
    n_points: int,
    bins: int,
    range_clip: tuple[float, float] | None,
    rng: np.random.Generator,
    reflected: bool = False,
) -> Histogram:
    """Histogram of one iterate realization at equispaced times in [0, 1]."""
    if n_points < 1 or bins < 1:
        raise InvalidParameter("n_points and bins must be >= 1")
    times = np.linspace(0.0, 1.0, n_points)
    vals = iterate_fdd(times, depth, params, rng, reflected=reflected)
    finite = vals[np.isfinite(vals)]
    counts, edges = np.histogram(finite, bins=bins, range=range_clip)
    widths = np.diff(edges)
    density = counts / (n_points * widths)
    return Histogram(edges, counts, density, n_points, n_points - int(counts.sum()))


def divergence_probe(
    params: StableParams,
    depth_max: int,
    threshold: float,
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Empirical P(|iterate at t=1| > threshold) for depths 1..depth_max.

    Overflowed (non-finite) values count as exceedances.
    """
    if depth_max < 1 or n_samples < 1:
        raise InvalidParameter("depth_max and n_samples must be >= 1")
    x = np.ones((n_samples, 1))
    freqs = np.empty(depth_max)
    for level, level_rng in enumerate(rng.spawn(depth_max)):
        x = _iterate_level(x, params, level_rng, reflected=False)
        exceed = ~np.isfinite(x) | (np.abs(x) > threshold)
        freqs[level] = exceed.mean()
    return freqs
