from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, special, stats

import oracles
from akms_secrecy import (
    ChannelParams,
    SeriesControl,
    cdf_asymptotic,
    cdf_general,
    cdf_general_detail,
    cdf_series,
    cdf_series_detail,
    derive_constants,
    log_pdf,
    pdf,
    pdf_series,
    sample_inverse_cdf,
    sf_general,
)
from akms_secrecy.errors import ConvergenceError, DomainError, PreconditionError
from conftest import TIGHT

PARAMS = [
    ChannelParams(2.0, 1.0, 1.0, 15.0, 1.0),
    ChannelParams(1.0, 5.0, 2.0, 0.5, 1.0),
    ChannelParams(3.5, 0.0, 3.0, 100.0, 1.0),
    ChannelParams(2.0, 1.0, 1.7, 2.5, 3.0),
    ChannelParams(3.0, 5.0, 1.0, 0.5, 10.0),
]


@pytest.mark.parametrize("p", PARAMS)
def test_constants_match_closed_form(p):
    at, c, a, b, d = (float(v) for v in oracles.mp_constants(p.alpha, p.kappa, p.mu, p.m, p.mean_snr))
    dc = derive_constants(p)
    assert dc.alpha_tilde == at
    for got, want in ((dc.c, c), (dc.a, a), (dc.b, b), (dc.d, d)):
        assert got == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_density_and_cdf_against_frozen(frozen):
    for case in frozen["density"]:
        p = ChannelParams(*case["params"])
        assert pdf(p, case["gamma"]) == pytest.approx(case["pdf"], rel=1e-12)
        assert cdf_general(p, case["gamma"], TIGHT) == pytest.approx(case["cdf"], rel=1e-12)


@pytest.mark.parametrize("p", PARAMS)
def test_unit_mass(p):
    val, _ = integrate.quad(lambda g: pdf(p, g), 0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=500,
                            points=None)
    assert val == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("p", PARAMS)
def test_cdf_properties(p):
    g = p.mean_snr * np.logspace(-4, 2, 200)
    f = cdf_general(p, g, TIGHT)
    assert np.all(np.diff(f) >= -1e-15)
    assert f[0] >= 0 and f[-1] <= 1
    assert cdf_general(p, 200 * p.mean_snr, TIGHT) == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(f + sf_general(p, g, TIGHT), 1.0, atol=1e-14)
    assert cdf_general(p, 0.0) == 0.0 and cdf_general(p, np.inf) == 1.0


@pytest.mark.parametrize("p", PARAMS)
def test_cdf_derivative_is_density(p):
    g = p.mean_snr * np.array([0.2, 0.8, 1.5, 3.0])
    h = 1e-5 * g
    fd = (cdf_general(p, g + h, TIGHT) - cdf_general(p, g - h, TIGHT)) / (2 * h)
    assert np.allclose(fd, pdf(p, g), rtol=1e-6, atol=1e-12)


@pytest.mark.parametrize("p", PARAMS)
def test_cdf_within_bound_of_mixture_oracle(p):
    g = p.mean_snr * np.array([0.05, 0.5, 1.0, 4.0])
    r = cdf_general_detail(p, g, SeriesControl(8, 1e-16, 200))
    truth = oracles.cdf_mixture((p.alpha, p.kappa, p.mu, p.m, p.mean_snr), g)
    assert np.all(np.abs(r.value - truth) <= r.trunc_estimate + 1e-14)


@pytest.mark.parametrize("p", PARAMS)
def test_density_series_bound(p):
    g = p.mean_snr * np.array([0.1, 0.7, 2.0, 6.0])
    for n in (3, 6, 20):
        r = pdf_series(p, g, SeriesControl(n, 1e-16, 200))
        assert np.all(np.abs(r.value - pdf(p, g)) <= r.trunc_estimate + 1e-14 * pdf(p, g))


@pytest.mark.parametrize("p", [q for q in PARAMS if float(q.mu).is_integer()])
def test_finite_sum_cdf_matches_general(p):
    g = p.mean_snr * np.logspace(-3, 1.5, 50)
    assert np.max(np.abs(cdf_series(p, g, TIGHT) - cdf_general(p, g, TIGHT))) < 1e-10
    r = cdf_series_detail(p, g, SeriesControl(5, 1e-16, 200))
    assert np.all(np.abs(r.value - cdf_general(p, g, TIGHT)) <= r.trunc_estimate + 1e-14)


def test_finite_sum_cdf_requires_integer_mu():
    with pytest.raises(PreconditionError):
        cdf_series(ChannelParams(2.0, 1.0, 1.7, 2.0, 1.0), 1.0)


def test_hard_cap_raises_with_partial():
    p = ChannelParams(2.0, 5.0, 1.0, 0.5, 1.0)
    with pytest.raises(ConvergenceError) as info:
        cdf_general(p, 50.0, SeriesControl(4, 1e-15, 4))
    assert info.value.partial is not None
    # below the cap the truncated value is returned instead
    r = cdf_general_detail(p, 50.0, SeriesControl(4, 1e-15, 10))
    assert r.terms_used == 4 and r.trunc_estimate > 0


@pytest.mark.parametrize("mu,gbar", [(1.0, 1.0), (2.0, 5.0), (3.5, 0.3)])
def test_nakagami_reduction(mu, gbar):
    # alpha = 2, kappa = 0 gives a gamma-distributed SNR with shape mu
    p = ChannelParams(2.0, 0.0, mu, 7.0, gbar)
    g = gbar * np.linspace(0.01, 5, 30)
    assert np.allclose(cdf_general(p, g), special.gammainc(mu, mu * g / gbar), atol=1e-14)


def test_alpha_mu_reduction():
    # kappa = 0: gamma^(alpha/2) is gamma distributed (generalized gamma SNR)
    alpha, mu, gbar = 3.0, 2.0, 4.0
    p = ChannelParams(alpha, 0.0, mu, 3.0, gbar)
    at = alpha / 2
    scale = gbar**at * (math.gamma(mu) / math.gamma(mu + 1 / at)) ** at
    g = np.linspace(0.1, 15, 25)
    assert np.allclose(cdf_general(p, g), special.gammainc(mu, g**at / scale), atol=1e-13)


def test_small_argument_asymptote():
    p = ChannelParams(2.0, 1.0, 2.0, 3.0, 1.0)
    g = np.array([1e-6, 1e-4])
    ratio = cdf_asymptotic(p, g) / cdf_general(p, g, TIGHT)
    assert np.allclose(ratio, 1.0, atol=1e-3)


def test_log_pdf_underflow_guard():
    p = ChannelParams(2.0, 1.0, 1.0, 15.0, 1.0)
    v = log_pdf(p, np.array([1e-300, 1.0, 100.0, 1e3, 1e6]))
    assert np.all(np.isfinite(v[:3]))
    # beyond the guard the density is below exp(-760) and reported as zero
    assert v[3] == -np.inf and v[4] == -np.inf
    assert pdf(p, 0.0) == pytest.approx(derive_constants(p).a)


@pytest.mark.parametrize("p", PARAMS)
def test_quantile_round_trip(p):
    u = np.array([1e-9, 0.01, 0.3, 0.5, 0.9, 0.999999])
    g = sample_inverse_cdf(p, u)
    back = np.where(u <= 0.5, cdf_general(p, g, TIGHT), 1 - sf_general(p, g, TIGHT))
    assert np.allclose(back, u, rtol=1e-10, atol=1e-15)


def test_rayleigh_median():
    p = ChannelParams(2.0, 0.0, 1.0, 1.0, 3.0)
    assert sample_inverse_cdf(p, 0.5) == pytest.approx(3.0 * math.log(2.0), rel=1e-12)


def test_inverse_samples_pass_ks_against_oracle():
    p = ChannelParams(2.0, 1.0, 1.0, 0.5, 2.0)
    u = np.random.default_rng(7).random(4000)
    g = sample_inverse_cdf(p, u)
    cdf = lambda x: oracles.cdf_mixture((p.alpha, p.kappa, p.mu, p.m, p.mean_snr), x)
    assert stats.kstest(g, cdf).pvalue > 0.01


@pytest.mark.parametrize(
    "kw", [dict(alpha=0.0), dict(kappa=-1.0), dict(mu=math.nan), dict(m=-2.0), dict(mean_snr=math.inf)]
)
def test_parameter_validation(kw):
    base = dict(alpha=2.0, kappa=1.0, mu=1.0, m=1.0, mean_snr=1.0)
    with pytest.raises(DomainError):
        ChannelParams(**{**base, **kw})


def test_from_db_and_replace():
    p = ChannelParams.from_db(2, 1, 1, 5, 10.0)
    assert p.mean_snr == pytest.approx(10.0)
    assert p.replace(m=50).m == 50.0 and p.m == 5.0
    with pytest.raises(DomainError):
        cdf_general(p, -1.0)
