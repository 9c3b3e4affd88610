"""Tests for the combinatorial kernel.

The branch families are checked three ways: against the six hand-derived
two-dimensional table entries, against kernel normalization (weights of a
family must sum to 1), and against direct numerical quadrature of the
defining Gaussian integrals (see test_mixture for the k >= 2 quadrature
oracles; the one-dimensional identity is checked here).
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from iterlib import core
from iterlib.errors import (
    CapacityExceeded,
    DegenerateInput,
    InvalidAnchor,
    InvalidParameter,
)

RNG = np.random.default_rng(20260810)


# ---------------------------------------------------------------------------
# prefix sums / gaps / encodings


def test_prefix_sums_examples():
    np.testing.assert_array_equal(core.prefix_sums([1, 2, 3]), [0, 1, 3, 6])
    np.testing.assert_array_equal(core.prefix_sums([]), [0])
    np.testing.assert_array_equal(core.prefix_sums([0.5, 0.5]), [0, 0.5, 1.0])


def test_gaps_examples():
    np.testing.assert_allclose(core.gaps([0, 3, 1]), [1, 2])
    np.testing.assert_allclose(core.gaps([0, -2, 5]), [2, 5])
    with pytest.raises(DegenerateInput):
        core.gaps([0.0, 1.0, 1.0])


@given(
    st.lists(st.integers(-100, 100), min_size=2, max_size=8, unique=True),
    st.integers(-200, 200),
)
def test_gaps_translation_invariant(halves, half_shift):
    # dyadic inputs keep the translation exact in floating point
    points = [h * 0.5 for h in halves]
    shift = half_shift * 0.5
    base = core.gaps(points)
    shifted = core.gaps([p + shift for p in points])
    np.testing.assert_allclose(shifted, base, atol=1e-9)


def test_encode_sorted_case():
    enc = core.encode([0.0, 1.0, 2.0])
    np.testing.assert_allclose(enc.gaps, [1, 1])
    assert enc.labelling == (0, 1, 2)


def test_encode_against_enumeration():
    # oracle: among all 6 permutations of {0,1,2}, exactly one reproduces
    # the vector through t_i = cum[p(i)] - cum[p(0)]
    t = np.array([0.0, -1.0, 1.0])
    enc = core.encode(t)
    np.testing.assert_allclose(enc.gaps, [1, 1])
    cum = core.prefix_sums(enc.gaps)
    matches = [
        p
        for p in itertools.permutations(range(3))
        if np.allclose([cum[p[i]] - cum[p[0]] for i in range(3)], t)
    ]
    assert matches == [(1, 0, 2)]
    assert enc.labelling == (1, 0, 2)


def test_encode_errors():
    with pytest.raises(InvalidAnchor):
        core.encode([1.0, 2.0])
    with pytest.raises(DegenerateInput):
        core.encode([0.0, 3.0, 3.0])


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=200)
def test_encode_decode_roundtrip(k, seed):
    rng = np.random.default_rng(seed)
    t = np.concatenate([[0.0], rng.uniform(-10, 10, k)])
    while len(np.unique(t)) != k + 1:  # pragma: no cover - measure-zero retry
        t = np.concatenate([[0.0], rng.uniform(-10, 10, k)])
    back = core.decode(core.encode(t))
    np.testing.assert_allclose(back, t, atol=1e-12)


def test_decode_labelling_order():
    # labelling (1,0,2) with gaps (1,1) is the vector (0,-1,1)
    enc = core.Encoding(np.array([1.0, 1.0]), (1, 0, 2))
    np.testing.assert_allclose(core.decode(enc), [0, -1, 1])


# ---------------------------------------------------------------------------
# permutation helpers


def test_perm_group_lexicographic_and_capped():
    assert core.perm_group(1) == ((0, 1), (1, 0))
    assert core.perm_group(2)[0] == (0, 1, 2)
    assert len(core.perm_group(5)) == 720
    with pytest.raises(CapacityExceeded):
        core.perm_group(9)


def test_compose_invert():
    p = (2, 0, 1)
    assert core.compose(core.invert(p), p) == (0, 1, 2)
    q = (1, 2, 0)
    comp = core.compose(p, q)
    assert comp == tuple(p[q[i]] for i in range(3))


# ---------------------------------------------------------------------------
# plain branch family


def test_step_cover_sets_examples():
    assert core.step_cover_sets((0, 1, 2)) == ((1,), (2,))
    assert core.step_cover_sets((0, 2, 1)) == ((1,), (1, 2))
    assert core.step_cover_sets((2, 1, 0)) == ((2,), (1,))


def test_cover_sets_nonempty_and_sized():
    for k in range(1, 6):
        for perm in core.perm_group(k):
            sets = core.step_cover_sets(perm)
            assert all(s for s in sets)
            total = sum(len(s) for s in sets)
            widths = sum(abs(perm[j] - perm[j - 1]) for j in range(1, k + 1))
            assert total == widths


def test_branch_rates_examples():
    np.testing.assert_allclose(core.branch_rates((0, 2, 1), [2.0, 2.0]), [2.0, 4.0])
    np.testing.assert_allclose(core.branch_rates((0, 1), [8.0]), [4.0])
    for k in range(1, 6):
        for perm in core.perm_group(k):
            f = core.branch_rates(perm, np.full(k, 2.0))
            assert np.all(f >= 2.0) and np.all(f <= 2.0 * k)


def test_two_dimensional_table_symbolically():
    # all six branch images and weights, written in terms of s_i = sqrt(2 c_i)
    for _ in range(100):
        c1, c2 = RNG.uniform(0.05, 20.0, 2)
        s1, s2 = math.sqrt(2 * c1), math.sqrt(2 * c2)
        expected = {
            (0, 1, 2): ((s1, s2), 0.25),
            (0, 2, 1): ((s1, s1 + s2), 0.25 * s2 / (s1 + s2)),
            (1, 0, 2): ((s1 + s2, s2), 0.25 * s1 / (s1 + s2)),
            (1, 2, 0): ((s2, s1 + s2), 0.25 * s1 / (s1 + s2)),
            (2, 0, 1): ((s1 + s2, s1), 0.25 * s2 / (s1 + s2)),
            (2, 1, 0): ((s2, s1), 0.25),
        }
        for perm, (f_exp, w_exp) in expected.items():
            f = core.branch_rates(perm, [c1, c2])
            w = core.branch_weight(perm, [c1, c2])
            np.testing.assert_allclose(f, f_exp, rtol=1e-12)
            assert w == pytest.approx(w_exp, rel=1e-12)


def test_branch_weight_examples():
    assert core.branch_weight((0, 1, 2), [3.0, 7.0]) == pytest.approx(0.25)
    assert core.branch_weight((0, 2, 1), [5.0, 5.0]) == pytest.approx(0.125)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_plain_weights_sum_to_one(k):
    for _ in range(20):
        c = RNG.uniform(0.1, 30.0, k)
        total = sum(core.branch_weight(p, c) for p in core.perm_group(k))
        assert total == pytest.approx(1.0, abs=1e-12)


def test_branch_rejects_nonpositive():
    with pytest.raises(InvalidParameter):
        core.branch_rates((0, 1), [0.0])
    with pytest.raises(InvalidParameter):
        core.branch_weight((0, 1, 2), [1.0, -2.0])


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
@settings(max_examples=100)
def test_branch_rates_monotone(k, seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.1, 10.0, k)
    bumped = c.copy()
    j = rng.integers(k)
    bumped[j] += rng.uniform(0.0, 5.0)
    for perm in core.perm_group(k):
        f0 = core.branch_rates(perm, c)
        f1 = core.branch_rates(perm, bumped)
        assert np.all(f1 >= f0 - 1e-12)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_plain_box_invariance(k):
    hi = 2.0 * k * k
    perms, mats = core.branch_family(k)
    pts = RNG.uniform(2.0, hi, (200, k))
    f = np.einsum("mij,nj->nmi", mats, np.sqrt(2.0 * pts))
    assert f.min() >= 2.0 - 1e-12 and f.max() <= hi + 1e-12


# ---------------------------------------------------------------------------
# reflected branch family


def test_reflected_k1_matches_plain():
    for lam in [0.5, 2.0, 8.0]:
        for subset in [frozenset(), frozenset({1})]:
            f, w = core.reflected_branch((1,), subset, [lam])
            np.testing.assert_allclose(f, [math.sqrt(2 * lam)])
            assert w == pytest.approx(0.5)


def test_reflected_one_step_quadrature_oracle():
    # one-dim identity behind both families: integrating an exponential
    # rate-lam gap against the folded Gaussian step density gives an
    # exponential with rate sqrt(2 lam)
    def folded_step_density(x, lam):
        val, _ = integrate.quad(
            lambda g: lam
            * math.exp(-lam * g)
            * 2.0
            * math.exp(-(x * x) / (2 * g))
            / math.sqrt(2 * math.pi * g),
            0.0,
            np.inf,
        )
        return val

    for lam in [0.5, 2.0, 8.0]:
        rate = math.sqrt(2.0 * lam)
        for x in [0.1, 0.7, 2.3]:
            assert folded_step_density(x, lam) == pytest.approx(
                rate * math.exp(-rate * x), rel=1e-7
            )


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_reflected_weights_sum_to_one(k):
    labels, _ = core.reflected_family(k)
    for _ in range(20):
        c = RNG.uniform(0.1, 30.0, k)
        total = sum(core.reflected_branch(p, d, c)[1] for p, d in labels)
        assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_reflected_box_invariance(k):
    hi = 18.0 * k * k
    _, mats = core.reflected_family(k)
    pts = RNG.uniform(2.0, hi, (200, k))
    f = np.einsum("mij,nj->nmi", mats, np.sqrt(2.0 * pts))
    assert f.min() >= 2.0 - 1e-12 and f.max() <= hi + 1e-12


def test_reflected_rejects_bad_input():
    with pytest.raises(InvalidParameter):
        core.reflected_branch((1, 2), frozenset({3}), [1.0, 1.0])
    with pytest.raises(InvalidParameter):
        core.reflected_branch((1, 2), frozenset(), [1.0, -1.0])


def test_reflected_family_capped():
    with pytest.raises(CapacityExceeded):
        core.reflected_family(7)  # 2^7 * 7! branches exceed the cap


# ---------------------------------------------------------------------------
# encoding branch family


def test_encoding_branch_k1():
    for lam in [0.5, 2.0]:
        for sp in [(0, 1), (1, 0)]:
            f, w = core.encoding_branch((0, 1), sp, [lam])
            np.testing.assert_allclose(f, [math.sqrt(2 * lam)])
            assert w == pytest.approx(0.5)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_encoding_weights_sum_to_one(k):
    ident = tuple(range(k + 1))
    for _ in range(20):
        lam = RNG.uniform(0.1, 30.0, k)
        total = sum(
            core.encoding_branch(ident, sp, lam)[1] for sp in core.perm_group(k)
        )
        assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_encoding_branch_aggregates_to_plain(k):
    # marginalizing the labelled family over the step permutation must
    # reproduce the plain family map-for-map
    ident = tuple(range(k + 1))
    for _ in range(10):
        lam = RNG.uniform(0.1, 10.0, k)
        for sp in core.perm_group(k):
            f, w = core.encoding_branch(ident, sp, lam)
            np.testing.assert_allclose(f, core.branch_rates(sp, lam), rtol=1e-12)
            assert w == pytest.approx(core.branch_weight(sp, lam), rel=1e-12)


# ---------------------------------------------------------------------------
# parameters


def test_stable_params_validation():
    core.StableParams(1.5, 1.0, 0.5)
    with pytest.raises(InvalidParameter):
        core.StableParams(0.0, 1.0, 0.0)
    with pytest.raises(InvalidParameter):
        core.StableParams(2.5, 1.0, 0.0)
    with pytest.raises(InvalidParameter):
        core.StableParams(2.0, 0.0, 0.0)
    assert core.BROWNIAN.alpha == 2.0
    assert core.BROWNIAN.sigma == pytest.approx(1 / math.sqrt(2))
