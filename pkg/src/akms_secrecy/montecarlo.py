"""Monte-Carlo oracle: AKMS SNR pairs by inverse-transform sampling.

Uniforms come from a Philox counter stream per link, keyed by
``SeedSequence(seed, spawn_key=(link,))``. A batch that starts at sample
``i0`` jumps the counter there, so the sample stream is the same whatever
the batch size or the number of worker threads.
"""

from __future__ import annotations

import math
from fractions import Fraction
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import expit, logit

from .channel import EXACT, ChannelParams, _mixture, _solve_x
from .errors import DomainError, NumericError
from .secrecy import SecrecyScenario, threshold_phi

__all__ = [
    "SimConfig",
    "EstimateWithError",
    "MonteCarloSummary",
    "uniform_stream",
    "sample_snr",
    "simulate_snr_pairs",
    "estimate_sop",
    "estimate_spsc",
    "estimate_asc",
    "estimate_all",
]

_KNOTS = 1024
_U_LO = 1e-10
_INTERP_TOL = 1e-8
_MAIN, _EVE = 0, 1


@dataclass(frozen=True)
class SimConfig:
    n_samples: int = 1_000_000
    seed: int = 0
    batch_size: int = 10_000
    workers: int = 1

    def __post_init__(self):
        n, bs = int(self.n_samples), int(self.batch_size)
        if n < 1 or bs < 1:
            raise DomainError("n_samples and batch_size must be positive")
        if bs > n:
            bs = n
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
        if int(self.workers) < 1:
            raise DomainError("workers must be >= 1")
        object.__setattr__(self, "n_samples", n)
        object.__setattr__(self, "batch_size", bs)
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "workers", int(self.workers))

    def batches(self) -> list[tuple[int, int]]:
        return [(i, min(self.batch_size, self.n_samples - i)) for i in range(0, self.n_samples, self.batch_size)]


@dataclass(frozen=True)
class EstimateWithError:
    mean: float
    std_error: float
    n: int

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(value - self.mean) <= k * self.std_error


# ---------------------------------------------------------------------------
# uniforms


def uniform_stream(seed: int, link: int, start: int, count: int) -> np.ndarray:
    """Uniforms ``start .. start+count-1`` of a link's stream, strictly inside (0, 1)."""
    key = np.random.SeedSequence(seed, spawn_key=(link,)).generate_state(2, np.uint64)
    bg = np.random.Philox(key=key)
    bg.advance(start // 4)
    skip = start % 4
    if skip:
        bg.random_raw(skip)
    raw = bg.random_raw(count)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


# ---------------------------------------------------------------------------
# inverse CDF table in x-space; depends on (kappa, mu, m) only


class _InverseTable:
    # Hermite cubic for log x against logit u, with exact slopes from the
    # density: d log x / dt = u (1 - u) / (x f(x)).
    _PROBES = (0.2, 0.5, 0.8)

    def __init__(self, p: ChannelParams):
        self.mix = _mixture(p)
        t = np.linspace(logit(_U_LO), logit(1 - _U_LO), _KNOTS)
        u = expit(t)
        x = _solve_x(self.mix, u, EXACT)
        slope = np.exp(np.log(u) + np.log1p(-u) - np.log(x) - self.mix.log_pdf_x(x))
        self.t = t
        self.interp = CubicHermiteSpline(t, np.log(x), slope)
        # probe each interval; a cubic error can vanish at the midpoint alone
        self.bad = np.zeros(_KNOTS - 1, dtype=bool)
        for frac in self._PROBES:
            tm = t[:-1] + frac * np.diff(t)
            um = expit(tm)
            xm = np.exp(self.interp(tm))
            resid = np.where(um <= 0.5, self.mix.cdf_x(xm, EXACT) - um, (1 - um) - self.mix.sf_x(xm, EXACT))
            self.bad |= np.abs(resid) > _INTERP_TOL

    def x(self, u: np.ndarray) -> np.ndarray:
        tu = logit(u)
        out = np.empty(u.shape)
        inside = (tu >= self.t[0]) & (tu <= self.t[-1])
        k = np.clip(np.searchsorted(self.t, tu) - 1, 0, len(self.t) - 2)
        exact = ~inside | self.bad[k]
        ok = ~exact
        out[ok] = np.exp(self.interp(tu[ok]))
        if exact.any():
            try:
                out[exact] = _solve_x(self.mix, u[exact], EXACT)
            except NumericError as exc:
                raise NumericError(f"sampler failed for uniforms {exc.partial!r}", partial=exc.partial) from exc
        return out


@lru_cache(maxsize=64)
def _table(kappa: float, mu: float, m: float) -> _InverseTable:
    return _InverseTable(ChannelParams(2.0, kappa, mu, m, 1.0))


def sample_snr(p: ChannelParams, u: np.ndarray) -> np.ndarray:
    """Map uniforms to SNR values through the inverse CDF."""
    table = _table(p.kappa, p.mu, p.m)
    x = table.x(np.asarray(u, dtype=float))
    return _mixture(p).x_to_gamma(x)


def _pair_batch(s: SecrecyScenario, seed: int, start: int, count: int):
    gh = sample_snr(s.main, uniform_stream(seed, _MAIN, start, count))
    gk = sample_snr(s.eve, uniform_stream(seed, _EVE, start, count))
    return gh, gk


def simulate_snr_pairs(s: SecrecyScenario, cfg: SimConfig) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(gamma_h, gamma_k)`` arrays batch by batch, in sample order."""
    for start, count in cfg.batches():
        yield _pair_batch(s, cfg.seed, start, count)


# ---------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class MonteCarloSummary:
    sop: EstimateWithError
    spsc: EstimateWithError
    asc_clipped: EstimateWithError
    asc_unclipped: EstimateWithError


_SCALE_BITS = 1126  # 2**-1126 is the smallest mantissa unit frexp can produce


def _exact_sum(v: np.ndarray) -> int:
    """Sum of a float array, exactly, as an integer multiple of ``2**-1126``.

    Exact partial sums add up to the same total however the samples are
    split into batches, which keeps estimates bit-identical across batch
    sizes and worker counts.
    """
    mant, exp = np.frexp(v)
    mi = (mant * 2.0**53).astype(np.int64)
    shift = exp.astype(np.int64) - 53 + _SCALE_BITS
    hi, lo = mi >> 26, mi & ((1 << 26) - 1)
    total = 0
    for e in np.unique(shift):
        sel = shift == e
        total += (int(hi[sel].sum()) * (1 << 26) + int(lo[sel].sum())) << int(e)
    return total


def _batch_stats(s: SecrecyScenario, seed: int, start: int, count: int, phi: float):
    gh, gk = _pair_batch(s, seed, start, count)
    diff = np.log1p(gh) - np.log1p(gk)
    clip = np.maximum(diff, 0.0)
    return (
        int(np.count_nonzero(gh < phi * gk)),
        int(np.count_nonzero(gh > gk)),
        _exact_sum(clip),
        _exact_sum(clip * clip),
        _exact_sum(diff),
        _exact_sum(diff * diff),
    )


def _run(s: SecrecyScenario, cfg: SimConfig):
    phi = threshold_phi(s.rate_target)
    jobs = cfg.batches()
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(lambda b: _batch_stats(s, cfg.seed, b[0], b[1], phi), jobs))
    else:
        parts = [_batch_stats(s, cfg.seed, b0, b1, phi) for b0, b1 in jobs]
    return tuple(sum(c) for c in zip(*parts))


def _proportion(k: int, n: int) -> EstimateWithError:
    p = k / n
    return EstimateWithError(p, math.sqrt(p * (1 - p) / n), n)


def _mean(total: int, total_sq: int, n: int) -> EstimateWithError:
    # totals are exact scaled sums; the variance is formed exactly, then rounded once
    unit = 1 << _SCALE_BITS
    s1 = Fraction(total, unit)
    s2 = Fraction(total_sq, unit)
    var = (s2 - s1 * s1 / n) / (n - 1) if n > 1 else Fraction(0)
    return EstimateWithError(float(s1 / n), math.sqrt(float(var) / n), n)


def estimate_all(s: SecrecyScenario, cfg: SimConfig) -> MonteCarloSummary:
    """All estimators from one pass over the sample stream."""
    n = cfg.n_samples
    n_sop, n_pos, c1, c2, u1, u2 = _run(s, cfg)
    return MonteCarloSummary(_proportion(n_sop, n), _proportion(n_pos, n), _mean(c1, c2, n), _mean(u1, u2, n))


def estimate_sop(s: SecrecyScenario, cfg: SimConfig) -> EstimateWithError:
    """Fraction of pairs with ``gamma_h < phi * gamma_k``."""
    return estimate_all(s, cfg).sop


def estimate_spsc(s: SecrecyScenario, cfg: SimConfig) -> EstimateWithError:
    """Fraction of pairs with ``gamma_h > gamma_k``."""
    return estimate_all(s, cfg).spsc


def estimate_asc(s: SecrecyScenario, cfg: SimConfig) -> tuple[EstimateWithError, EstimateWithError]:
    """Sample means (nats) of the clipped and unclipped log-SNR differences."""
    r = estimate_all(s, cfg)
    return r.asc_clipped, r.asc_unclipped
