from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest

from akms_secrecy.errors import ConvergenceError, DomainError
from akms_secrecy.specfun import (
    AccuracyBudget,
    hyp1f1,
    hyp2f1,
    ln_gamma,
    log_hyp1f1_pos,
    log_poch_table,
    lower_inc_gamma,
    reg_inc_gamma,
    upper_inc_gamma,
)


@pytest.mark.parametrize("x", [1e-8, 0.3, 1.0, 2.5, 17.0, 170.5, 1e5])
def test_ln_gamma_matches_mpmath(x):
    assert ln_gamma(x) == pytest.approx(float(mp.loggamma(x)), rel=1e-14, abs=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
def test_ln_gamma_rejects_bad_input(x):
    with pytest.raises(DomainError):
        ln_gamma(x)


def test_log_poch_table_large_a():
    a = 1e6 + 0.5
    tab = log_poch_table(a, 6)
    for k, v in enumerate(tab):
        assert v == pytest.approx(float(mp.log(mp.rf(a, k))), rel=1e-14, abs=1e-15)


S_GRID = [0.5, 1.0, 3.0, 20.0, 150.0]
X_GRID = [1e-6, 0.1, 1.0, 4.0, 19.0, 30.0, 170.0, 400.0]


@pytest.mark.parametrize("s", S_GRID)
def test_reg_inc_gamma_against_mpmath(s):
    p, q = reg_inc_gamma(s, np.array(X_GRID))
    for x, pv, qv in zip(X_GRID, p, q):
        pe = float(mp.gammainc(s, 0, x, regularized=True))
        qe = float(mp.gammainc(s, x, mp.inf, regularized=True))
        # the smaller of the pair is the one computed directly
        if pe < qe:
            assert pv == pytest.approx(pe, rel=1e-12, abs=1e-300)
        else:
            assert qv == pytest.approx(qe, rel=1e-12, abs=1e-300)
        assert pv + qv == pytest.approx(1.0, abs=1e-15)


def test_reg_inc_gamma_edges():
    p, q = reg_inc_gamma([2.0, 2.0], [0.0, math.inf])
    assert list(p) == [0.0, 1.0] and list(q) == [1.0, 0.0]
    with pytest.raises(DomainError):
        reg_inc_gamma(0.0, 1.0)
    with pytest.raises(DomainError):
        reg_inc_gamma(1.0, -1.0)


def test_inc_gamma_recurrence():
    # gamma(s+1, x) = s gamma(s, x) + x^s e^-x
    for s, x in [(0.7, 0.4), (2.5, 3.0), (8.0, 12.0)]:
        lhs = upper_inc_gamma(s + 1, x)
        rhs = s * upper_inc_gamma(s, x) + x**s * math.exp(-x)
        assert lhs == pytest.approx(rhs, rel=1e-12)
        assert lower_inc_gamma(s, x) + upper_inc_gamma(s, x) == pytest.approx(math.gamma(s), rel=1e-13)


def _mp_hyp1f1(a, b, z, dps=50):
    # plain Maclaurin sum at high precision; independent of mpmath's own routine
    with mp.workdps(dps):
        a, b, z = mp.mpf(a), mp.mpf(b), mp.mpf(z)
        term, total, n = mp.mpf(1), mp.mpf(1), 0
        while abs(term) > mp.mpf(10) ** (-dps + 5) * abs(total) or n < 5:
            term *= (a + n) / (b + n) * z / (n + 1)
            total += term
            n += 1
        return total


@pytest.mark.parametrize(
    "a,b,z",
    [(0.5, 1.0, 2.0), (15.0, 1.0, 3.0), (100.0, 3.0, 0.9), (2.5, 1.7, 40.0), (0.5, 2.0, -3.0), (3.0, 1.0, -25.0)],
)
def test_hyp1f1_against_high_precision_series(a, b, z):
    expected = float(_mp_hyp1f1(a, b, z, dps=80))
    assert hyp1f1(a, b, z) == pytest.approx(expected, rel=1e-11)


def test_hyp1f1_kummer_identity():
    for a, b, z in [(1.5, 2.5, 3.0), (4.0, 1.0, 7.5)]:
        assert hyp1f1(a, b, z) == pytest.approx(math.exp(z) * hyp1f1(b - a, b, -z), rel=1e-12)


def test_hyp1f1_contiguous_relation():
    # (b - a) M(a-1) + (2a - b + z) M(a) - a M(a+1) = 0
    a, b, z = 2.3, 1.6, 4.2
    lhs = (b - a) * hyp1f1(a - 1, b, z) + (2 * a - b + z) * hyp1f1(a, b, z) - a * hyp1f1(a + 1, b, z)
    assert abs(lhs) < 1e-11 * a * hyp1f1(a + 1, b, z)


def test_log_hyp1f1_pos_large_argument():
    y = np.array([0.0, 1.0, 50.0, 700.0, 5000.0])
    got = log_hyp1f1_pos(15.0, 1.0, y, AccuracyBudget(1e-14, 400_000))
    for yi, gi in zip(y, got):
        assert gi == pytest.approx(float(mp.log(mp.hyp1f1(15, 1, yi))), rel=1e-12, abs=1e-14)


def test_log_hyp1f1_pos_budget_exhaustion_reports_partial():
    with pytest.raises(ConvergenceError) as info:
        log_hyp1f1_pos(15.0, 1.0, np.array([5000.0]), AccuracyBudget(1e-14, 50))
    assert info.value.terms >= 50 and info.value.partial is not None


@pytest.mark.parametrize(
    "a,b,c,z",
    [
        (15.0, 2.0, 1.0, 0.0625),
        (0.5, 1.5, 1.0, 0.6666666666666666),
        (100.0, 1.5, 1.0, 0.047619047619047616),
        (0.5, 1.2857142857142858, 3.0, 0.967741935483871),
        (2.0, 2.5, 1.0, 0.95),
        (0.5, 1.5714285714285714, 1.0, 0.9090909090909091),
    ],
)
def test_hyp2f1_against_mpmath(a, b, c, z):
    assert hyp2f1(a, b, c, z) == pytest.approx(float(mp.hyp2f1(a, b, c, z)), rel=1e-11)


def test_hyp2f1_domain():
    with pytest.raises(DomainError):
        hyp2f1(1.0, 1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        AccuracyBudget(rel_tol=0.0)
