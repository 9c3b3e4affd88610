"""Combinatorial and arithmetic kernel for gap-chain propagation.

Everything here is pure and deterministic: gap extraction, the
(gaps, labelling-permutation) encoding of anchored time vectors, and the
three families of one-step maps acting on vectors of exponential rate
parameters, together with their branch weights:

* plain family, indexed by a permutation of {0..k},
* reflected family, indexed by a permutation of {1..k} (index 0 pinned
  to 0) plus a sign subset of {1..k},
* encoding family, indexed by a step permutation of {0..k}; it carries
  the labelling along by composition.

A branch map sends a rate vector c to the vector F(c) with
``F_i(c) = sum_j m[i, j] * sqrt(2 c_j)`` where m[i, j] counts how often
coordinate i of the new gap vector picks up the increment of slot j in
the sorted traversal; the branch weight is
``2**-k * prod_i sqrt(2 c_i) / F_i(c)`` and the weights of a family sum
to 1 (each family is a Markov kernel on rate vectors).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import (
    CapacityExceeded,
    DegenerateInput,
    InvalidAnchor,
    InvalidParameter,
)

#: Full enumeration is refused above this many branches ((k+1)! for the
#: plain family, i.e. k <= 8; the reflected family 2^k k! hits it at k = 7).
MAX_BRANCHES = 362_880

Permutation = tuple[int, ...]


# ---------------------------------------------------------------------------
# permutations


def check_branch_count(count: int) -> None:
    if count > MAX_BRANCHES:
        raise CapacityExceeded(
            f"{count} branches exceed the enumeration cap {MAX_BRANCHES}"
        )


@lru_cache(maxsize=None)
def perm_group(k: int) -> tuple[Permutation, ...]:
    """All permutations of {0..k} as image tuples, in lexicographic order."""
    if k < 0:
        raise InvalidParameter("k must be >= 0")
    check_branch_count(math.factorial(k + 1))
    return tuple(itertools.permutations(range(k + 1)))


@lru_cache(maxsize=None)
def anchored_perm_group(k: int) -> tuple[Permutation, ...]:
    """All permutations of {1..k} as image tuples (index 0 is pinned to 0)."""
    if k < 1:
        raise InvalidParameter("k must be >= 1")
    check_branch_count(math.factorial(k))
    return tuple(itertools.permutations(range(1, k + 1)))


def compose(outer: Permutation, inner: Permutation) -> Permutation:
    """(outer o inner)(i) = outer[inner[i]]."""
    return tuple(outer[j] for j in inner)


def invert(perm: Permutation) -> Permutation:
    out = [0] * len(perm)
    for i, j in enumerate(perm):
        out[j] = i
    return tuple(out)


def _validate_perm(perm: Sequence[int], lo: int, hi: int) -> None:
    if sorted(perm) != list(range(lo, hi + 1)):
        raise InvalidParameter(f"not a permutation of [{lo}, {hi}]: {perm!r}")


# ---------------------------------------------------------------------------
# gaps and encodings


def prefix_sums(x) -> np.ndarray:
    """(x_1..x_k) -> (0, x_1, x_1+x_2, ..., x_1+...+x_k)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.size + 1)
    np.cumsum(x, out=out[1:])
    return out


def gaps(points) -> np.ndarray:
    """Successive differences of the sorted input; requires distinct entries."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 1 or pts.size < 1:
        raise InvalidParameter("need a 1-d sequence of at least one point")
    d = np.diff(np.sort(pts))
    if pts.size > 1 and not np.all(d > 0.0):
        raise DegenerateInput("points are not pairwise distinct")
    return d


@dataclass(frozen=True)
class Encoding:
    """Anchored time vector split into its gap vector and labelling.

    ``decode`` reproduces the vector through
    ``t_i = cum[labelling[i]] - cum[labelling[0]]`` with ``cum`` the
    prefix sums of ``gaps``; ``labelling`` is the unique permutation of
    {0..k} that makes this hold, equivalently the inverse of the sorting
    permutation of t.
    """

    gaps: np.ndarray
    labelling: Permutation

    def __post_init__(self):
        object.__setattr__(self, "gaps", np.asarray(self.gaps, dtype=float))
        object.__setattr__(self, "labelling", tuple(int(i) for i in self.labelling))
        k = self.gaps.size
        if len(self.labelling) != k + 1:
            raise InvalidParameter("labelling length must be len(gaps) + 1")
        _validate_perm(self.labelling, 0, k)
        if np.any(self.gaps <= 0.0):
            raise InvalidParameter("gaps must be strictly positive")

    @property
    def k(self) -> int:
        return self.gaps.size


def encode(t) -> Encoding:
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise InvalidParameter("need at least two entries to encode")
    if t[0] != 0.0:
        raise InvalidAnchor("first entry must be exactly 0")
    order = np.argsort(t, kind="stable")  # order[i] = index of i-th smallest
    g = np.diff(t[order])
    if not np.all(g > 0.0):
        raise DegenerateInput("entries are not pairwise distinct")
    labelling = invert(tuple(int(i) for i in order))
    return Encoding(g, labelling)


def decode(enc: Encoding) -> np.ndarray:
    cum = prefix_sums(enc.gaps)
    lab = np.asarray(enc.labelling)
    return cum[lab] - cum[lab[0]]


# ---------------------------------------------------------------------------
# plain branch family


def step_cover_sets(perm: Permutation) -> tuple[tuple[int, ...], ...]:
    """For each coordinate i in 1..k, the slots whose sorted-step increment
    contains it.

    Slot j in 1..k is the step from perm[j-1] to perm[j]; it contains
    coordinate i exactly when min(perm[j-1], perm[j]) < i <= max(...).
    Every returned set is nonempty (the traversal visits both sides of i).
    """
    k = len(perm) - 1
    _validate_perm(perm, 0, k)
    out = []
    for i in range(1, k + 1):
        out.append(
            tuple(
                j
                for j in range(1, k + 1)
                if min(perm[j - 1], perm[j]) < i <= max(perm[j - 1], perm[j])
            )
        )
    return tuple(out)


def _cover_matrix(perm: Permutation) -> np.ndarray:
    k = len(perm) - 1
    m = np.zeros((k, k))
    for i, slots in enumerate(step_cover_sets(perm)):
        for j in slots:
            m[i, j - 1] = 1.0
    return m


def _as_rates(c, k: int | None = None) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.ndim != 1:
        raise InvalidParameter("rate vector must be 1-d")
    if k is not None and c.size != k:
        raise InvalidParameter(f"rate vector must have length {k}")
    if not np.all(c > 0.0) or not np.all(np.isfinite(c)):
        raise InvalidParameter("rates must be finite and strictly positive")
    return c


def _weight_from_ratio(s: np.ndarray, f: np.ndarray, k: int) -> float:
    # log-space above k = 4 guards against underflow of long ratio products
    if k > 4:
        return float(np.exp(-k * math.log(2.0) + np.log(s).sum() - np.log(f).sum()))
    return float(2.0**-k * np.prod(s / f))


def branch_rates(perm: Permutation, c) -> np.ndarray:
    """Image of the rate vector c under the branch indexed by perm."""
    c = _as_rates(c, len(perm) - 1)
    return _cover_matrix(perm) @ np.sqrt(2.0 * c)


def branch_weight(perm: Permutation, c) -> float:
    """Probability of the branch indexed by perm, given rates c."""
    k = len(perm) - 1
    c = _as_rates(c, k)
    s = np.sqrt(2.0 * c)
    return _weight_from_ratio(s, _cover_matrix(perm) @ s, k)


@lru_cache(maxsize=None)
def branch_family(k: int) -> tuple[tuple[Permutation, ...], np.ndarray]:
    """All plain branches for dimension k: (perms, stacked cover matrices)."""
    perms = perm_group(k)
    return perms, np.stack([_cover_matrix(p) for p in perms])


# ---------------------------------------------------------------------------
# reflected branch family


def _reflected_multiplicity(perm: Permutation, subset: frozenset[int]) -> np.ndarray:
    """Appearance counts m[i-1, j-1] of coordinate i in slot j.

    perm is on {1..k} with the implicit anchor perm(0) = 0.  Slots in
    ``subset`` carry the difference |cum[perm(j)] - cum[perm(j-1)]| (one
    appearance per crossing); the others carry the sum
    cum[perm(j)] + cum[perm(j-1)], where coordinate i appears once per
    endpoint >= i (so up to twice).
    """
    k = len(perm)
    path = (0,) + perm
    m = np.zeros((k, k))
    for j in range(1, k + 1):
        a, b = path[j - 1], path[j]
        for i in range(1, k + 1):
            if j in subset:
                m[i - 1, j - 1] = 1.0 if min(a, b) < i <= max(a, b) else 0.0
            else:
                m[i - 1, j - 1] = float(b >= i) + float(a >= i)
    return m


def reflected_branch(perm: Permutation, subset, c) -> tuple[np.ndarray, float]:
    """One reflected branch: (new rates, weight) for (perm, sign subset)."""
    k = len(perm)
    _validate_perm(perm, 1, k)
    subset = frozenset(int(j) for j in subset)
    if not subset <= set(range(1, k + 1)):
        raise InvalidParameter("subset must be contained in {1..k}")
    c = _as_rates(c, k)
    s = np.sqrt(2.0 * c)
    f = _reflected_multiplicity(perm, subset) @ s
    return f, _weight_from_ratio(s, f, k)


@lru_cache(maxsize=None)
def reflected_family(
    k: int,
) -> tuple[tuple[tuple[Permutation, frozenset[int]], ...], np.ndarray]:
    """All reflected branches: ((perm, subset) pairs, stacked count matrices).

    Order: permutations lexicographic, subsets by ascending bitmask
    (bit j-1 set means slot j uses the difference kernel).
    """
    perms = anchored_perm_group(k)
    check_branch_count(len(perms) * 2**k)
    labels = []
    mats = []
    for p in perms:
        for mask in range(2**k):
            subset = frozenset(j for j in range(1, k + 1) if mask >> (j - 1) & 1)
            labels.append((p, subset))
            mats.append(_reflected_multiplicity(p, subset))
    return tuple(labels), np.stack(mats)


# ---------------------------------------------------------------------------
# encoding branch family


def encoding_branch(
    labelling: Permutation, step_perm: Permutation, rates
) -> tuple[np.ndarray, float]:
    """One branch of the labelled chain: (new rates, weight).

    New gap coordinate j accumulates sqrt(2 rates_i) over the factor
    slots i whose sorted step, read off ``step_perm``, spans j; the
    outcome does not depend on the current ``labelling`` (the new
    labelling is ``compose(step_perm, labelling)``, tracked by the
    caller).  The weight is 2**-k * prod_i sqrt(2 rates_i) / prod_j F_j,
    which makes the family a Markov kernel.
    """
    k = len(step_perm) - 1
    _validate_perm(labelling, 0, k)
    _validate_perm(step_perm, 0, k)
    lam = _as_rates(rates, k)
    s = np.sqrt(2.0 * lam)
    f = np.zeros(k)
    for i in range(1, k + 1):
        lo = min(step_perm[i - 1], step_perm[i])
        hi = max(step_perm[i - 1], step_perm[i])
        f[lo:hi] += s[i - 1]  # gap coordinates lo+1 .. hi (1-based)
    return f, _weight_from_ratio(s, f, k)


# ---------------------------------------------------------------------------
# process parameters


@dataclass(frozen=True)
class StableParams:
    """Index of stability, scale, and location drift of the driving process.

    alpha in (0, 2], sigma > 0.  alpha = 2 with sigma = 1/sqrt(2) and
    r = 0 is standard Brownian motion.
    """

    alpha: float
    sigma: float = 1.0
    r: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise InvalidParameter("alpha must lie in (0, 2]")
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise InvalidParameter("sigma must be finite and positive")
        if not math.isfinite(self.r):
            raise InvalidParameter("r must be finite")


BROWNIAN = StableParams(alpha=2.0, sigma=1.0 / math.sqrt(2.0), r=0.0)
