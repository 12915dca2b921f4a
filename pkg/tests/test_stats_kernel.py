import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from aag.stats.kernel import (
    AllZeroDifferences,
    ConstantInput,
    average_ranks,
    binomial_test_one_sided,
    mann_whitney_u,
    pearson_r,
    regularized_beta,
    wilcoxon_signed_rank,
)
from oracles import binom_upper, mwu_enumerate, pearson_definition, wilcoxon_enumerate

likert = st.integers(1, 5)


def test_average_ranks_ties():
    assert average_ranks([10, 20, 20, 30]) == [1, 2.5, 2.5, 4]


# -- Wilcoxon ----------------------------------------------------------------

def test_wilcoxon_all_positive():
    r = wilcoxon_signed_rank([4, 5, 4, 5, 5], 3)
    assert r.statistic == 15 and r.exact
    assert r.p_value == pytest.approx(1 / 32, abs=1e-12)


def test_wilcoxon_with_zero_and_ties():
    r = wilcoxon_signed_rank([5, 1, 4, 4, 3], 3)
    assert r.detail["m"] == 4 and r.detail["n_zero"] == 1
    assert r.statistic == 6.5 and r.detail["w_minus"] == 3.5 and r.detail["w_min"] == 3.5
    assert r.p_value == pytest.approx(3 / 8, abs=1e-12)


def test_wilcoxon_all_zero():
    with pytest.raises(AllZeroDifferences):
        wilcoxon_signed_rank([3, 3, 3], 3)


def test_wilcoxon_less_and_two_sided():
    vals = [1, 2, 1, 2, 4]
    lo = wilcoxon_signed_rank(vals, alternative="less").p_value
    hi = wilcoxon_signed_rank(vals, alternative="greater").p_value
    two = wilcoxon_signed_rank(vals, alternative="two-sided").p_value
    assert lo < 0.5 < hi
    assert two == pytest.approx(min(1, 2 * min(lo, hi)))


def test_bad_alternative():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([4], alternative="bigger")
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([4], method="fast")


@settings(max_examples=150, deadline=None)
@given(st.lists(likert, min_size=1, max_size=10))
def test_wilcoxon_matches_enumeration(values):
    if all(v == 3 for v in values):
        return
    r = wilcoxon_signed_rank(values, 3, method="exact")
    w, p = wilcoxon_enumerate(values, 3)
    m = r.detail["m"]
    assert r.statistic == w
    assert r.detail["w_plus"] + r.detail["w_minus"] == m * (m + 1) / 2
    assert abs(r.p_value - float(p)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(st.lists(likert, min_size=1, max_size=30), st.randoms(use_true_random=False))
def test_wilcoxon_permutation_invariant(values, rnd):
    if all(v == 3 for v in values):
        return
    shuffled = list(values)
    rnd.shuffle(shuffled)
    a, b = wilcoxon_signed_rank(values), wilcoxon_signed_rank(shuffled)
    assert (a.statistic, a.p_value) == (b.statistic, b.p_value)


def test_wilcoxon_auto_switches_to_approx():
    rng = random.Random(1)
    vals = [rng.choice([1, 2, 4, 5]) for _ in range(40)]
    r = wilcoxon_signed_rank(vals)
    assert not r.exact and "z" in r.detail


def test_wilcoxon_exact_vs_approx_tie_free():
    rng = random.Random(7)
    for _ in range(20):
        m = rng.randint(20, 25)
        vals = [3 + s * k for s, k in zip((rng.choice((-1, 1)) for _ in range(m)), range(1, m + 1))]
        e = wilcoxon_signed_rank(vals, 3, method="exact").p_value
        a = wilcoxon_signed_rank(vals, 3, method="approx").p_value
        assert abs(e - a) <= 0.01


# -- Mann-Whitney ------------------------------------------------------------

def test_mwu_separated():
    r = mann_whitney_u([4, 5, 6], [1, 2, 3])
    assert r.statistic == 9 and r.exact
    assert r.p_value == pytest.approx(1 / 20, abs=1e-12)


def test_mwu_identical_groups():
    r = mann_whitney_u([1, 2, 3], [1, 2, 3])
    assert r.statistic == 4.5
    assert r.p_value == pytest.approx(7 / 10, abs=1e-12)
    two = mann_whitney_u([1, 2, 3], [1, 2, 3], alternative="two-sided").p_value
    assert two == 1.0


def test_mwu_empty_group():
    with pytest.raises(ValueError):
        mann_whitney_u([], [1])


@settings(max_examples=150, deadline=None)
@given(st.lists(likert, min_size=1, max_size=6), st.lists(likert, min_size=1, max_size=6))
def test_mwu_matches_enumeration(g1, g2):
    r = mann_whitney_u(g1, g2, method="exact")
    u, p = mwu_enumerate(g1, g2)
    assert r.statistic == u
    assert r.detail["u1"] + r.detail["u2"] == len(g1) * len(g2)
    assert abs(r.p_value - float(p)) <= 1e-12


def test_mwu_swap_symmetry():
    g1, g2 = [5, 4, 4, 3, 5], [2, 3, 1, 4]
    a = mann_whitney_u(g1, g2, alternative="greater").p_value
    b = mann_whitney_u(g2, g1, alternative="less").p_value
    assert a == pytest.approx(b, abs=1e-12)


def test_mwu_large_exact_uses_wide_counts():
    # C(70, 35) > 2**62, forcing the arbitrary-precision path
    g1 = list(range(0, 70, 2))
    g2 = list(range(1, 70, 2))
    e = mann_whitney_u(g1, g2, alternative="less", method="exact").p_value
    a = mann_whitney_u(g1, g2, alternative="less", method="approx").p_value
    assert abs(e - a) < 0.01


# -- binomial ----------------------------------------------------------------

@pytest.mark.parametrize("k,n", [(5, 10), (10, 10), (0, 10), (7, 12), (1, 1)])
def test_binomial_against_fraction(k, n):
    assert binomial_test_one_sided(k, n).p_value == pytest.approx(float(binom_upper(k, n)), rel=1e-12)


def test_binomial_small_values():
    assert binomial_test_one_sided(5, 10).p_value == pytest.approx(638 / 1024, abs=1e-12)
    assert binomial_test_one_sided(10, 10).p_value == pytest.approx(1 / 1024, abs=1e-15)


def test_binomial_survey_size():
    r = binomial_test_one_sided(93, 104)
    assert r.statistic == pytest.approx(0.89423, abs=1e-4)
    assert r.p_value == pytest.approx(float(binom_upper(93, 104)), rel=1e-10)
    assert r.p_value < 1e-4


def test_binomial_less_and_p0():
    assert binomial_test_one_sided(2, 10, alternative="less").p_value == pytest.approx(56 / 1024)
    exact = float(binom_upper(3, 8, Fraction(1, 4)))
    assert binomial_test_one_sided(3, 8, 0.25).p_value == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("args", [(11, 10), (-1, 10), (0, 0), (1, 2, 0.0), (1, 2, 1.0)])
def test_binomial_rejects(args):
    with pytest.raises(ValueError):
        binomial_test_one_sided(*args)


@given(st.integers(1, 300))
def test_binomial_monotone(n):
    ps = [binomial_test_one_sided(k, n).p_value for k in range(n + 1)]
    assert ps[0] == 1.0
    assert all(a >= b for a, b in zip(ps, ps[1:]))


# -- Pearson -----------------------------------------------------------------

def test_pearson_reference_value():
    r = pearson_r([1, 2, 3, 4], [2, 4, 4, 8])
    assert r.statistic == pytest.approx(pearson_definition([1, 2, 3, 4], [2, 4, 4, 8]), abs=1e-12)
    assert round(r.statistic, 4) == 0.9234


def test_pearson_constant():
    with pytest.raises(ConstantInput):
        pearson_r([1, 1, 1], [1, 2, 3])


def test_pearson_length_checks():
    with pytest.raises(ValueError):
        pearson_r([1, 2], [1])
    with pytest.raises(ValueError):
        pearson_r([1], [1])


def test_pearson_pvalue_against_scipy():
    stats = pytest.importorskip("scipy.stats")
    rng = random.Random(3)
    for n in (3, 5, 12, 40, 150):
        x = [rng.randint(0, 10) for _ in range(n)]
        y = [v + rng.randint(-4, 4) for v in x]
        ours = pearson_r(x, y)
        ref = stats.pearsonr(x, y)
        assert ours.statistic == pytest.approx(ref.statistic, abs=1e-12)
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-300)


def test_regularized_beta_against_mpmath():
    mpmath = pytest.importorskip("mpmath")
    for x, a, b in [(0.3, 5, 0.5), (0.95, 20, 0.5), (0.01, 0.5, 74), (0.5, 2.5, 3.5)]:
        ref = float(mpmath.betainc(a, b, 0, x, regularized=True))
        assert regularized_beta(x, a, b) == pytest.approx(ref, rel=1e-11)


def test_regularized_beta_closed_forms():
    # I_x(a, 1) = x**a and I_x(1, b) = 1 - (1 - x)**b
    for x in (0.1, 0.5, 0.93):
        assert regularized_beta(x, 3, 1) == pytest.approx(x**3, rel=1e-12)
        assert regularized_beta(x, 1, 4) == pytest.approx(1 - (1 - x) ** 4, rel=1e-12)
    # I_x(1/2, 1/2) = 2/pi * asin(sqrt(x))
    for x in (0.2, 0.7):
        assert regularized_beta(x, 0.5, 0.5) == pytest.approx(2 / math.pi * math.asin(math.sqrt(x)), rel=1e-10)


pairs = st.lists(st.tuples(st.integers(0, 10), st.integers(0, 10)), min_size=3, max_size=40)


@settings(max_examples=200, deadline=None)
@given(pairs, st.floats(0.1, 50), st.floats(-20, 20), st.floats(0.1, 50), st.floats(-20, 20))
def test_pearson_properties(data, a, b, c, d):
    x = [p[0] for p in data]
    y = [p[1] for p in data]
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    r = pearson_r(x, y).statistic
    assert -1 <= r <= 1
    assert r == pytest.approx(pearson_definition(x, y), abs=1e-9)
    assert pearson_r([a * v + b for v in x], [c * v + d for v in y]).statistic == pytest.approx(r, abs=1e-9)
    assert pearson_r([-v for v in x], y).statistic == pytest.approx(-r, abs=1e-12)
    assert pearson_r(y, x).statistic == pytest.approx(r, abs=1e-12)
