"""Exact propagation of finite exponential-product mixtures.

A mixture is a finite weighted set of atoms; each atom is a vector of k
exponential rate parameters (optionally tagged with a labelling
permutation for the labelled chain).  One propagation step replaces
every atom by its full branch family from :mod:`iterlib.core`, so the
chain of gap laws of an iterated Brownian (or reflected Brownian)
process is computed exactly, up to an explicitly tracked
total-variation pruning budget.

The same branch weights drive a rate-vector Markov chain whose long-run
states sample the invariant parameter law; gap and value vectors of the
limiting process are reconstructed from those states.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import core
from .errors import CapacityExceeded, InvalidInput, InvalidParameter

_WEIGHT_TOL = 1e-9
_ATOM_CHUNK = 20_000


@dataclass(frozen=True)
class PrunePolicy:
    """Controls atom merging and dropping between propagation steps.

    ``tv_budget`` bounds the total dropped weight per step; a step that
    would have to discard more raises :class:`CapacityExceeded` instead
    of silently degrading.
    """

    merge_tolerance: float = 1e-12
    max_atoms: int = 200_000
    min_weight: float = 1e-12
    tv_budget: float = 1e-6


DEFAULT_POLICY = PrunePolicy()


def _check_atoms(weights: np.ndarray, rates: np.ndarray) -> None:
    if weights.ndim != 1 or rates.ndim != 2 or rates.shape[0] != weights.size:
        raise InvalidParameter("weights must be (n,), rates (n, k)")
    if weights.size == 0:
        raise InvalidParameter("mixture needs at least one atom")
    if np.any(weights <= 0.0):
        raise InvalidParameter("weights must be strictly positive")
    if abs(weights.sum() - 1.0) > _WEIGHT_TOL:
        raise InvalidParameter("weights must sum to 1")
    if not np.all(rates > 0.0) or not np.all(np.isfinite(rates)):
        raise InvalidParameter("rates must be finite and strictly positive")


@dataclass
class ExponentialMixture:
    """Weighted atoms (weight, rate vector); density is
    sum_n w_n prod_i rate_{n,i} exp(-rate_{n,i} x_i) on the positive orthant."""

    weights: np.ndarray
    rates: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        if self.rates.ndim == 1:
            self.rates = self.rates[:, None]
        _check_atoms(self.weights, self.rates)

    @classmethod
    def single(cls, rates) -> "ExponentialMixture":
        rates = np.atleast_2d(np.asarray(rates, dtype=float))
        return cls(np.ones(1), rates)

    @property
    def k(self) -> int:
        return self.rates.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.weights.size


@dataclass
class EncodingMixture:
    """Atoms carrying a labelling permutation alongside the rate vector."""

    weights: np.ndarray
    rates: np.ndarray
    labellings: np.ndarray  # (n, k+1) int

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.rates = np.asarray(self.rates, dtype=float)
        if self.rates.ndim == 1:
            self.rates = self.rates[:, None]
        self.labellings = np.asarray(self.labellings, dtype=np.int64)
        if self.labellings.ndim == 1:
            self.labellings = self.labellings[None, :]
        _check_atoms(self.weights, self.rates)
        if self.labellings.shape != (self.weights.size, self.rates.shape[1] + 1):
            raise InvalidParameter("labellings must be (n, k+1)")

    @classmethod
    def single(cls, rates, labelling) -> "EncodingMixture":
        rates = np.atleast_2d(np.asarray(rates, dtype=float))
        return cls(np.ones(1), rates, np.asarray(labelling, dtype=np.int64)[None, :])

    @property
    def k(self) -> int:
        return self.rates.shape[1]

    @property
    def n_atoms(self) -> int:
        return self.weights.size


# ---------------------------------------------------------------------------
# pruning


def _merge_exact(weights, keys):
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    merged = np.zeros(first.size)
    np.add.at(merged, inverse, weights)
    return merged, first


def _merge_close(weights, keys, tol):
    order = np.lexsort(keys.T[::-1])
    sk = keys[order]
    diff = np.abs(np.diff(sk, axis=0))
    scale = np.maximum(np.abs(sk[1:]), np.abs(sk[:-1]))
    close = np.all(diff <= tol * np.maximum(scale, 1e-300), axis=1)
    group = np.concatenate([[0], np.cumsum(~close)])
    merged = np.zeros(group[-1] + 1)
    np.add.at(merged, group, weights[order])
    rep = np.zeros(merged.size, dtype=np.int64)
    rep[group[::-1]] = order[::-1]  # first row of each group wins
    return merged, rep


def _sort_atoms(weights, *arrays):
    order = np.argsort(-weights, kind="stable")
    return (weights[order],) + tuple(a[order] for a in arrays)


def prune(
    mixture, policy: PrunePolicy = DEFAULT_POLICY
) -> tuple["ExponentialMixture | EncodingMixture", float]:
    """Merge coincident atoms, drop negligible ones, cap the atom count.

    Returns the pruned mixture and the total-variation perturbation
    bound (the weight mass dropped, before renormalization).
    """
    labelled = isinstance(mixture, EncodingMixture)
    weights = mixture.weights
    rates = mixture.rates
    labellings = mixture.labellings if labelled else None
    keys = (
        np.concatenate([rates, labellings.astype(float)], axis=1)
        if labelled
        else rates
    )

    weights, rep = _merge_exact(weights, keys)
    rates, keys = rates[rep], keys[rep]
    if labelled:
        labellings = labellings[rep]
    if policy.merge_tolerance > 0.0 and weights.size > 1:
        weights, rep = _merge_close(weights, keys, policy.merge_tolerance)
        rates = rates[rep]
        if labelled:
            labellings = labellings[rep]

    dropped = 0.0
    keep = weights >= policy.min_weight
    if not np.all(keep) and np.any(keep):
        dropped += float(weights[~keep].sum())
        weights, rates = weights[keep], rates[keep]
        if labelled:
            labellings = labellings[keep]
    if weights.size > policy.max_atoms:
        order = np.argsort(-weights, kind="stable")[: policy.max_atoms]
        dropped += float(weights.sum() - weights[order].sum())
        weights, rates = weights[order], rates[order]
        if labelled:
            labellings = labellings[order]

    weights = weights / weights.sum()
    if labelled:
        weights, rates, labellings = _sort_atoms(weights, rates, labellings)
        return EncodingMixture(weights, rates, labellings), dropped
    weights, rates = _sort_atoms(weights, rates)
    return ExponentialMixture(weights, rates), dropped


def _expand(weights, rates, mats, log_space):
    """All branch images of all atoms: ((n*m,) weights, (n*m, k) rates)."""
    out_w, out_r = [], []
    k = rates.shape[1]
    for lo in range(0, rates.shape[0], _ATOM_CHUNK):
        w = weights[lo : lo + _ATOM_CHUNK]
        s = np.sqrt(2.0 * rates[lo : lo + _ATOM_CHUNK])  # (n, k)
        f = np.einsum("mij,nj->nmi", mats, s)  # (n, m, k)
        if log_space:
            logmult = np.log(s).sum(axis=1)[:, None] - np.log(f).sum(axis=2)
            mult = np.exp(-k * math.log(2.0) + logmult)
        else:
            mult = 2.0**-k * np.prod(s[:, None, :] / f, axis=2)  # (n, m)
        out_w.append((w[:, None] * mult).ravel())
        out_r.append(f.reshape(-1, k))
    return np.concatenate(out_w), np.concatenate(out_r)


def _finish_step(weights, rates, labellings, policy):
    if labellings is None:
        expanded = ExponentialMixture(weights, rates)
    else:
        expanded = EncodingMixture(weights, rates, labellings)
    if policy is None:
        # exact merging only; never drops weight
        lossless = PrunePolicy(
            merge_tolerance=0.0, max_atoms=2**62, min_weight=0.0, tv_budget=0.0
        )
        pruned, _ = prune(expanded, lossless)
        if pruned.n_atoms > DEFAULT_POLICY.max_atoms:
            raise CapacityExceeded(
                f"{pruned.n_atoms} atoms exceed {DEFAULT_POLICY.max_atoms} "
                "and pruning is disabled"
            )
        return pruned
    pruned, dropped = prune(expanded, policy)
    if dropped > policy.tv_budget:
        raise CapacityExceeded(
            f"pruning would discard {dropped:.3e} > tv_budget {policy.tv_budget:.3e}"
        )
    return pruned


def op_step(
    m: ExponentialMixture, policy: PrunePolicy | None = DEFAULT_POLICY
) -> ExponentialMixture:
    """One gap-chain step for the plain process: each atom branches over
    all (k+1)! permutations."""
    _, mats = core.branch_family(m.k)
    w, r = _expand(m.weights, m.rates, mats, log_space=m.k > 4)
    return _finish_step(w, r, None, policy)


def op_step_reflected(
    m: ExponentialMixture, policy: PrunePolicy | None = DEFAULT_POLICY
) -> ExponentialMixture:
    """One gap-chain step for the reflected process: branch factor 2^k k!."""
    _, mats = core.reflected_family(m.k)
    w, r = _expand(m.weights, m.rates, mats, log_space=m.k > 4)
    return _finish_step(w, r, None, policy)


def encoding_step(
    m: EncodingMixture, policy: PrunePolicy | None = DEFAULT_POLICY
) -> EncodingMixture:
    """One labelled-chain step: atom (w, rates, lab) branches into
    (w * weight, new rates, step o lab) over all step permutations."""
    perms, mats = core.branch_family(m.k)
    w, r = _expand(m.weights, m.rates, mats, log_space=m.k > 4)
    perm_arr = np.asarray(perms, dtype=np.int64)  # (m, k+1)
    # composed labellings (step o lab): [p, a, i] = step_p[lab_a[i]],
    # reordered atom-major to match _expand's raveling
    labs = (
        np.take(perm_arr, m.labellings, axis=1)
        .transpose(1, 0, 2)
        .reshape(m.n_atoms * len(perms), m.k + 1)
    )
    return _finish_step(w, r, labs, policy)


# ---------------------------------------------------------------------------
# densities and serialization


def density_eval(m: ExponentialMixture, x) -> float | np.ndarray:
    """Mixture density at x (a k-vector or an (p, k) array of points)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != m.k:
        raise InvalidParameter(f"points must have dimension {m.k}")
    if np.any(pts < 0.0):
        raise InvalidParameter("density is supported on the positive orthant")
    out = np.zeros(pts.shape[0])  # chunked over atoms to bound memory
    for lo in range(0, m.n_atoms, _ATOM_CHUNK):
        lam = m.rates[lo : lo + _ATOM_CHUNK]
        w = m.weights[lo : lo + _ATOM_CHUNK]
        logd = np.log(lam).sum(axis=1)[None, :] - pts @ lam.T  # (p, n)
        out += (np.exp(logd) * w[None, :]).sum(axis=1)
    return float(out[0]) if single else out


def mixture_to_json(m: ExponentialMixture | EncodingMixture) -> str:
    atoms = []
    labelled = isinstance(m, EncodingMixture)
    for i in range(m.n_atoms):
        atom = {"weight": float(m.weights[i]), "rates": [float(v) for v in m.rates[i]]}
        if labelled:
            atom["labelling"] = [int(v) for v in m.labellings[i]]
        atoms.append(atom)
    return json.dumps(atoms, indent=1)


def mixture_from_json(text: str) -> ExponentialMixture | EncodingMixture:
    atoms = json.loads(text)
    if not atoms:
        raise InvalidInput("empty mixture")
    weights = np.array([a["weight"] for a in atoms])
    rates = np.array([a["rates"] for a in atoms])
    if "labelling" in atoms[0]:
        labs = np.array([a["labelling"] for a in atoms], dtype=np.int64)
        return EncodingMixture(weights, rates, labs)
    return ExponentialMixture(weights, rates)


# ---------------------------------------------------------------------------
# parameter chain


def _family_tables(k: int, variant: str):
    if variant == "plain":
        _, mats = core.branch_family(k)
    elif variant == "reflected":
        _, mats = core.reflected_family(k)
    else:
        raise InvalidParameter(f"unknown variant {variant!r}")
    return mats


def param_chain_step(
    lam, rng: np.random.Generator, variant: str = "plain"
) -> np.ndarray:
    """One transition of the rate-vector chain: pick a branch with its
    weight, return the branch image."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0):
        raise InvalidParameter("rates must be strictly positive")
    mats = _family_tables(lam.size, variant)
    s = np.sqrt(2.0 * lam)
    f = mats @ s  # (m, k)
    w = 2.0 ** -lam.size * np.prod(s[None, :] / f, axis=1)
    cum = np.cumsum(w)
    idx = int(np.searchsorted(cum, rng.random() * cum[-1]))
    return f[min(idx, f.shape[0] - 1)]


def param_chain_run(
    lam0,
    n_steps: int,
    burn_in: int,
    thin: int,
    rng: np.random.Generator,
    variant: str = "plain",
) -> np.ndarray:
    """Run the rate-vector chain; return post-burn-in, thinned states."""
    lam = np.asarray(lam0, dtype=float)
    if np.any(lam <= 0.0):
        raise InvalidParameter("rates must be strictly positive")
    if burn_in >= n_steps:
        raise InvalidParameter("burn_in must be smaller than n_steps")
    thin = max(int(thin), 1)
    k = lam.size
    mats = _family_tables(k, variant)
    nmaps = mats.shape[0]
    uniforms = rng.random(n_steps)
    kept = np.empty(((n_steps - burn_in + thin - 1) // thin, k))
    half_pow = 2.0**-k
    out = 0
    for step in range(n_steps):
        s = np.sqrt(2.0 * lam)
        f = mats @ s
        w = half_pow * np.prod(s[None, :] / f, axis=1)
        cum = np.cumsum(w)
        idx = min(int(np.searchsorted(cum, uniforms[step] * cum[-1])), nmaps - 1)
        lam = f[idx]
        if step >= burn_in and (step - burn_in) % thin == 0:
            kept[out] = lam
            out += 1
    return kept[:out]


# ---------------------------------------------------------------------------
# sampling the limit from parameter states


def sample_gaps_limit(param_samples, rng: np.random.Generator) -> np.ndarray:
    """One gap vector per parameter state: coordinate i is exponential
    with rate lambda_i."""
    lam = np.atleast_2d(np.asarray(param_samples, dtype=float))
    if np.any(lam <= 0.0):
        raise InvalidParameter("rates must be strictly positive")
    return rng.exponential(1.0 / lam)


def _random_perms(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    return np.argsort(rng.random((n, size)), axis=1)


def reconstruct_fdd(gap_samples, rng: np.random.Generator) -> np.ndarray:
    """Limit value vectors from limit gap vectors.

    Per row: prefix-sum the gaps, recentre at a uniformly chosen entry,
    shuffle by a uniform permutation, and drop the single zero
    coordinate; the remaining k coordinates are exchangeable and carry
    the k-point limit law.
    """
    g = np.atleast_2d(np.asarray(gap_samples, dtype=float))
    n, k = g.shape
    cum = np.concatenate([np.zeros((n, 1)), np.cumsum(g, axis=1)], axis=1)
    perms = _random_perms(n, k + 1, rng)  # row-wise uniform on S_{0..k}
    anchor = rng.integers(0, k + 1, n)
    vals = np.take_along_axis(cum, perms, axis=1)  # vals[:, i] = cum[perm[i]]
    vals -= cum[np.arange(n), anchor][:, None]
    keep = perms != anchor[:, None]  # drops exactly one zero per row
    return vals[keep].reshape(n, k)


def reconstruct_fdd_reflected(gap_samples, rng: np.random.Generator) -> np.ndarray:
    """Reflected limit value vectors: prefix sums of the gaps reindexed
    by a uniform permutation of {1..k}; all coordinates stay positive."""
    g = np.atleast_2d(np.asarray(gap_samples, dtype=float))
    n, k = g.shape
    cum = np.cumsum(g, axis=1)  # positions 1..k, no zero anchor
    perms = _random_perms(n, k, rng)
    return np.take_along_axis(cum, perms, axis=1)


# ---------------------------------------------------------------------------
# exact finite-dimensional engine


def propagate_encoding(
    depth: int,
    lam0,
    labelling=None,
    policy: PrunePolicy | None = DEFAULT_POLICY,
) -> EncodingMixture:
    """Propagate the labelled mixture started at (rates lam0, labelling)
    through ``depth`` steps."""
    lam0 = np.asarray(lam0, dtype=float)
    k = lam0.size
    if labelling is None:
        labelling = tuple(range(k + 1))
    m = EncodingMixture.single(lam0, labelling)
    for _ in range(depth):
        m = encoding_step(m, policy)
    return m


def sample_encoding_mixture(
    m: EncodingMixture, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw value vectors from a labelled mixture.

    Per draw: pick an atom by weight, draw its gap vector from the
    atom's exponential rates, decode with the atom's labelling, and
    return coordinates 1..k (coordinate 0 of the decoded vector is 0).
    """
    k = m.k
    cum = np.cumsum(m.weights)
    idx = np.searchsorted(cum, rng.random(n_samples) * cum[-1])
    idx = np.minimum(idx, m.n_atoms - 1)
    g = rng.exponential(1.0 / m.rates[idx])  # (n, k)
    csum = np.concatenate([np.zeros((n_samples, 1)), np.cumsum(g, axis=1)], axis=1)
    labs = m.labellings[idx]  # (n, k+1)
    vals = np.take_along_axis(csum, labs, axis=1)
    vals -= vals[:, :1]
    return vals[:, 1:]


def exact_iterated_sampler(
    depth: int,
    lam0,
    labelling,
    n_samples: int,
    rng: np.random.Generator,
    policy: PrunePolicy | None = DEFAULT_POLICY,
) -> np.ndarray:
    """Exact samples (up to the pruning TV bound) of the depth-n iterate
    at randomized initial times with independent exponential gaps."""
    return sample_encoding_mixture(
        propagate_encoding(depth, lam0, labelling, policy), n_samples, rng
    )


def expectation(
    depth: int,
    lam0,
    labelling,
    f,
    n_samples: int,
    rng: np.random.Generator,
    policy: PrunePolicy | None = DEFAULT_POLICY,
) -> tuple[float, float]:
    """Monte Carlo estimate (mean, standard error) of f under the exact
    depth-n law; f maps an (n, k) array to (n,) values (rows applied
    one-by-one if it does not broadcast)."""
    samples = exact_iterated_sampler(depth, lam0, labelling, n_samples, rng, policy)
    try:
        vals = np.asarray(f(samples), dtype=float)
        if vals.shape != (n_samples,):
            raise ValueError
    except Exception:
        vals = np.array([float(f(row)) for row in samples])
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return est, se
