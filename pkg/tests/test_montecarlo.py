from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate, special

from akms_secrecy import (
    ChannelParams,
    SecrecyScenario,
    SimConfig,
    estimate_all,
    estimate_asc,
    estimate_sop,
    estimate_spsc,
    pdf,
    simulate_snr_pairs,
)
from akms_secrecy.errors import DomainError
from akms_secrecy.montecarlo import EstimateWithError, sample_snr, uniform_stream

SCEN = SecrecyScenario(ChannelParams(2, 1, 1, 5, 10.0), ChannelParams(2, 1, 1, 5, 1.0), 0.5)


def test_uniform_stream_is_offset_consistent():
    whole = uniform_stream(3, 0, 0, 1000)
    for start in (0, 1, 5, 403, 997):
        part = uniform_stream(3, 0, start, 1000 - start)
        assert np.array_equal(part, whole[start:])
    assert np.all((whole > 0) & (whole < 1))
    assert not np.array_equal(whole, uniform_stream(3, 1, 0, 1000))
    assert not np.array_equal(whole, uniform_stream(4, 0, 0, 1000))


def test_results_independent_of_batching_and_workers():
    ref = estimate_all(SCEN, SimConfig(20_000, seed=9, batch_size=20_000))
    for bs, w in ((1_000, 1), (3_333, 4), (7, 1)):
        if bs == 7:
            cfg = SimConfig(2_000, seed=9, batch_size=bs)
            small = estimate_all(SCEN, SimConfig(2_000, seed=9, batch_size=2_000))
            assert estimate_all(SCEN, cfg) == small
            continue
        assert estimate_all(SCEN, SimConfig(20_000, seed=9, batch_size=bs, workers=w)) == ref


def test_pairs_stream_concatenates():
    cfg = SimConfig(5_000, seed=1, batch_size=1_234)
    gh = np.concatenate([a for a, _ in simulate_snr_pairs(SCEN, cfg)])
    gh_one = next(simulate_snr_pairs(SCEN, SimConfig(5_000, seed=1, batch_size=5_000)))[0]
    assert np.array_equal(gh, gh_one)


def test_estimators_agree_with_summary():
    cfg = SimConfig(10_000, seed=5, batch_size=2_500)
    r = estimate_all(SCEN, cfg)
    assert estimate_sop(SCEN, cfg) == r.sop
    assert estimate_spsc(SCEN, cfg) == r.spsc
    assert estimate_asc(SCEN, cfg) == (r.asc_clipped, r.asc_unclipped)
    assert r.sop.std_error == pytest.approx(math.sqrt(r.sop.mean * (1 - r.sop.mean) / 10_000))


@pytest.mark.parametrize(
    "p", [ChannelParams(2, 1, 1, 15, 1.0), ChannelParams(3.5, 5, 2, 0.5, 1.0), ChannelParams(1, 0, 3, 100, 1.0)]
)
def test_first_two_moments(p):
    g = sample_snr(p, uniform_stream(11, 0, 0, 200_000))
    n = g.size
    m1, _ = integrate.quad(lambda x: x * pdf(p, x), 0, np.inf, epsrel=1e-11, limit=400)
    m2, _ = integrate.quad(lambda x: x * x * pdf(p, x), 0, np.inf, epsrel=1e-11, limit=400)
    assert m1 == pytest.approx(p.mean_snr, rel=1e-8)
    assert abs(g.mean() - m1) <= 3 * g.std(ddof=1) / math.sqrt(n)
    assert abs((g * g).mean() - m2) <= 3 * (g * g).std(ddof=1) / math.sqrt(n)


def test_rayleigh_samples_are_exponential():
    p = ChannelParams(2, 0, 1, 1, 2.0)
    u = uniform_stream(0, 0, 0, 5000)
    # the inverse table is accurate to 1e-8 in probability
    assert np.max(np.abs(-np.expm1(-sample_snr(p, u) / 2.0) - u)) <= 1e-8


def test_nakagami_samples_are_gamma():
    p = ChannelParams(2, 0, 2.5, 1, 1.0)
    u = uniform_stream(0, 0, 0, 5000)
    assert np.max(np.abs(special.gammainc(2.5, 2.5 * sample_snr(p, u)) - u)) <= 1e-8


def test_estimate_within():
    e = EstimateWithError(0.5, 0.01, 100)
    assert e.within(0.529) and not e.within(0.531)


@pytest.mark.parametrize(
    "kw", [dict(n_samples=0), dict(batch_size=0), dict(seed=-1), dict(seed=2**64), dict(workers=0)]
)
def test_sim_config_validation(kw):
    with pytest.raises(DomainError):
        SimConfig(**kw)


def test_batch_size_clipped_to_sample_count():
    assert SimConfig(10, batch_size=100).batches() == [(0, 10)]
