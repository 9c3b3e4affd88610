"""Attractor of the rate-map family: box covers, chaos game, diagnostics.

The branch maps are coordinatewise nondecreasing, so the image of an
axis-aligned box [a, b] lies inside the rectangle [F(a), F(b)]; covering
that rectangle with grid boxes gives a guaranteed outer cover of the
image at every step.  Iterating the union of covers from the full
invariant box produces a non-increasing sequence of covers whose limit
contains the support of the invariant parameter law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import core, mixture
from .errors import InvalidInput, InvalidParameter, NoConvergence


def invariant_box(k: int) -> tuple[float, float]:
    """Lower/upper corner value of the invariant box for dimension k."""
    return 2.0, 2.0 * k * k


@dataclass
class BoxSet:
    """Axis-aligned grid boxes: box n covers
    prod_i [origin + n_i * s, origin + (n_i + 1) * s) with side s.

    The grid is anchored at the invariant-box corner so the invariant
    box is tiled exactly; ``per_axis`` fixes the grid extent.
    """

    resolution: float
    origin: float
    per_axis: int
    boxes: np.ndarray  # (n, k) int64

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=np.int64)
        if self.boxes.ndim != 2:
            raise InvalidParameter("boxes must be (n, k)")
        if self.resolution <= 0.0:
            raise InvalidParameter("resolution must be positive")
        if self.per_axis < 1:
            raise InvalidParameter("per_axis must be >= 1")

    @property
    def k(self) -> int:
        return self.boxes.shape[1]

    @property
    def n_boxes(self) -> int:
        return self.boxes.shape[0]

    def centers(self) -> np.ndarray:
        return self.origin + (self.boxes + 0.5) * self.resolution

    def lower(self) -> np.ndarray:
        return self.origin + self.boxes * self.resolution

    def upper(self) -> np.ndarray:
        return self.origin + (self.boxes + 1) * self.resolution

    @classmethod
    def full(
        cls, k: int, boxes_per_axis: int, upper: float | None = None
    ) -> "BoxSet":
        lo, hi = invariant_box(k)
        if upper is not None:
            hi = upper
        if hi <= lo:
            raise InvalidParameter(
                "degenerate cover; pass an explicit upper bound > 2"
            )
        res = (hi - lo) / boxes_per_axis
        grids = np.meshgrid(*[np.arange(boxes_per_axis)] * k, indexing="ij")
        boxes = np.stack([g.ravel() for g in grids], axis=1)
        return cls(res, lo, boxes_per_axis, boxes)


@dataclass
class PointCloud:
    points: np.ndarray  # (n, k)

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    @property
    def k(self) -> int:
        return self.points.shape[1]


def _mark_rectangles(grid: np.ndarray, ilo: np.ndarray, ihi: np.ndarray) -> None:
    """Set every grid cell overlapping each integer rectangle [ilo, ihi]."""
    shape = grid.shape
    k = len(shape)
    spans = ihi - ilo + 1  # (n, k)
    counts = spans.prod(axis=1)
    total = int(counts.sum())
    if total == 0:
        return
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    local = np.arange(total) - np.repeat(starts, counts)
    rows = np.repeat(np.arange(ilo.shape[0]), counts)
    flat = np.zeros(total, dtype=np.int64)
    for axis in range(k - 1, -1, -1):
        span = spans[rows, axis]
        offset = local % span
        local //= span
        flat += (ilo[rows, axis] + offset) * int(np.prod(shape[axis + 1 :], dtype=np.int64))
    grid.ravel()[flat] = True


def ifs_box_step(b: BoxSet) -> BoxSet:
    """One cover iteration: union over all branch maps of the box images,
    intersected with the current cover (the sequence is non-increasing
    from the full invariant box, and the intersection keeps it so)."""
    k = b.k
    res = b.resolution
    per_axis = b.per_axis
    _, mats = core.branch_family(k)
    lower = np.sqrt(2.0 * b.lower())
    upper = np.sqrt(2.0 * b.upper())
    marked = np.zeros((per_axis,) * k, dtype=bool)
    for m in mats:
        flo = lower @ m.T  # image of the lower corner (maps are monotone)
        fhi = upper @ m.T
        ilo = np.floor((flo - b.origin) / res).astype(np.int64)
        ihi = np.floor((fhi - b.origin) / res).astype(np.int64)
        np.clip(ilo, 0, per_axis - 1, out=ilo)
        np.clip(ihi, 0, per_axis - 1, out=ihi)
        _mark_rectangles(marked, ilo, ihi)
    previous = np.zeros_like(marked)
    previous.ravel()[np.ravel_multi_index(b.boxes.T, marked.shape)] = True
    marked &= previous
    return BoxSet(res, b.origin, per_axis, np.argwhere(marked))


def ifs_box_iterate(
    k: int, depth: int, boxes_per_axis: int, upper: float | None = None
) -> BoxSet:
    """Iterate the cover ``depth`` times from the full invariant box."""
    b = BoxSet.full(k, boxes_per_axis, upper)
    for _ in range(depth):
        b = ifs_box_step(b)
    return b


def chaos_game(
    k: int, steps: int, burn_in: int, rng: np.random.Generator
) -> PointCloud:
    """Random sequential application of the branch maps; post-burn-in
    states trace the attractor."""
    if steps <= burn_in:
        raise InvalidParameter("steps must exceed burn_in")
    states = mixture.param_chain_run(np.full(k, 2.0), steps, burn_in, 1, rng)
    return PointCloud(states)


def _half_diagonal(obj) -> float:
    if isinstance(obj, BoxSet):
        return 0.5 * obj.resolution * math.sqrt(obj.k)
    return 0.0


def _rep_points(obj) -> np.ndarray:
    if isinstance(obj, BoxSet):
        if obj.n_boxes == 0:
            raise InvalidInput("empty box set")
        return obj.centers()
    pts = obj.points if isinstance(obj, PointCloud) else np.atleast_2d(obj)
    if pts.shape[0] == 0:
        raise InvalidInput("empty point set")
    return pts


def hausdorff_distance(a, b) -> float:
    """Symmetric Hausdorff distance between clouds and/or box covers.

    Box sets are represented by their centers; the result is inflated by
    each box side's half diagonal to account for the cell extent.
    """
    pa, pb = _rep_points(a), _rep_points(b)
    d_ab = cKDTree(pb).query(pa, k=1)[0].max()
    d_ba = cKDTree(pa).query(pb, k=1)[0].max()
    return float(max(d_ab, d_ba) + _half_diagonal(a) + _half_diagonal(b))


def composition_fixed_point(
    perm_sequence, k: int, tol: float = 1e-12, max_iter: int = 100_000
) -> np.ndarray:
    """Fixed point of the composition of the listed branch maps
    (first listed applied last), iterated from the box corner."""
    perms = [tuple(p) for p in perm_sequence]
    if not perms:
        raise InvalidParameter("need at least one permutation")
    x = np.full(k, 2.0)
    for _ in range(max_iter):
        y = x
        for perm in reversed(perms):
            y = core.branch_rates(perm, y)
        if np.max(np.abs(y - x)) < tol:
            return y
        x = y
    raise NoConvergence(f"no fixed point within {max_iter} iterations")


def _pattern(perm) -> np.ndarray:
    m = np.zeros((len(perm) - 1, len(perm) - 1))
    for i, slots in enumerate(core.step_cover_sets(tuple(perm))):
        for j in slots:
            m[i, j - 1] = 1.0
    return m


def jacobian(perm, c) -> np.ndarray:
    """d branch_rates / d c: entry (i, j) is m[i, j] / sqrt(2 c_j)."""
    c = np.asarray(c, dtype=float)
    return _pattern(perm) / np.sqrt(2.0 * c)[None, :]


def fd_jacobian(perm, c, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian (independent numeric check)."""
    c = np.asarray(c, dtype=float)
    k = c.size
    out = np.zeros((k, k))
    for j in range(k):
        step = np.zeros(k)
        step[j] = h * max(1.0, abs(c[j]))
        out[:, j] = (
            core.branch_rates(tuple(perm), c + step)
            - core.branch_rates(tuple(perm), c - step)
        ) / (2.0 * step[j])
    return out


def _spectral_norms(jacs: np.ndarray, iters: int = 50, tol: float = 1e-10):
    """Largest singular value per matrix via power iteration on J^T J."""
    a = np.einsum("nij,nik->njk", jacs, jacs)
    k = a.shape[1]
    v = np.full((a.shape[0], k), 1.0 / math.sqrt(k))
    lam = np.zeros(a.shape[0])
    for _ in range(iters):
        w = np.einsum("njk,nk->nj", a, v)
        new = np.linalg.norm(w, axis=1)
        if np.all(np.abs(new - lam) <= tol * np.maximum(new, 1.0)):
            lam = new
            break
        lam = new
        v = w / np.maximum(new, 1e-300)[:, None]
    return np.sqrt(lam)


def box_grid(k: int, per_axis: int, lo: float | None = None, hi: float | None = None):
    """Uniform grid of points spanning the invariant box (or [lo, hi]^k)."""
    if lo is None or hi is None:
        lo, hi = invariant_box(k)
    axes = [np.linspace(lo, hi, per_axis)] * k
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def lipschitz_estimate(perm, k: int, grid) -> float:
    """Max spectral norm of the analytic Jacobian over the grid points."""
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    if pts.shape[1] != k:
        raise InvalidParameter(f"grid must have dimension {k}")
    jacs = _pattern(perm)[None, :, :] / np.sqrt(2.0 * pts)[:, None, :]
    return float(_spectral_norms(jacs).max())


def average_contraction_check(k: int, grid) -> tuple[bool, float]:
    """Whether sum_branches weight * log(spectral norm) stays negative on
    the grid; returns (all negative, worst margin)."""
    pts = np.atleast_2d(np.asarray(grid, dtype=float))
    _, mats = core.branch_family(k)
    s = np.sqrt(2.0 * pts)  # (n, k)
    total = np.zeros(pts.shape[0])
    for m in mats:
        f = s @ m.T
        w = 2.0**-k * np.prod(s / f, axis=1)
        jacs = m[None, :, :] / s[:, None, :]
        total += w * np.log(_spectral_norms(jacs))
    margin = float(total.max())
    return margin < 0.0, margin


# ---------------------------------------------------------------------------
# exports


def boxes_to_rows(b: BoxSet) -> np.ndarray:
    """Plot-ready rows: box centers."""
    return b.centers()


def cloud_to_rows(c: PointCloud) -> np.ndarray:
    return c.points
