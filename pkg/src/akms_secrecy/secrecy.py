"""Secrecy metrics of an AKMS wiretap pair: SOP lower bound, SPSC, ASC.

Integrals run in the eavesdropper's (or main link's) mixture variable
``x = b * gamma**alpha_tilde`` on ``[0, X]``, where ``X`` is a Chernoff
point past which the link carries less than 1e-22 probability. That finite
range is what keeps the adaptive rule well away from underflowed tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .channel import (
    EXACT,
    ChannelParams,
    SeriesControl,
    _mixture,
    _sum_series,
    asymptotic_constants,
    derive_constants,
    is_integer_mu,
)
from .errors import ConvergenceError, DomainError, NumericError, PreconditionError
from .quadrature import integrate
from .specfun import log_poch_table

__all__ = [
    "SecrecyScenario",
    "MetricResult",
    "AscBreakdown",
    "threshold_phi",
    "sop_lower_numeric",
    "sop_lower_exact",
    "sop_asymptotic",
    "diversity_gain",
    "spsc",
    "asc",
]

_TAIL_MASS = 1e-22
_CLAMP_SLACK = 1e-9
METHODS = ("series", "quadrature", "asymptotic", "montecarlo")


@dataclass(frozen=True)
class SecrecyScenario:
    main: ChannelParams
    eve: ChannelParams
    rate_target: float = 0.0

    def __post_init__(self):
        r = float(self.rate_target)
        if not math.isfinite(r) or r < 0:
            raise DomainError(f"rate_target must be finite and >= 0, got {r}")
        object.__setattr__(self, "rate_target", r)

    def with_rate(self, rate_target: float) -> SecrecyScenario:
        return SecrecyScenario(self.main, self.eve, rate_target)


@dataclass(frozen=True)
class MetricResult:
    """A metric value with its error estimate.

    ``clamped`` is set when round-off pushed a probability just outside
    ``[0, 1]``; the distance moved is folded into ``error_estimate``.
    """

    value: float
    error_estimate: float
    terms_or_evals: int
    method: str
    clamped: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.error_estimate >= 0):
            raise ValueError("error_estimate must be >= 0")


@dataclass(frozen=True)
class AscBreakdown:
    im1: float
    im2: float
    im3: float
    asc_nats: float
    asc_bits: float
    errors: tuple = field(default=(0.0, 0.0, 0.0))
    evals: int = 0

    @property
    def error_estimate(self) -> float:
        return float(sum(self.errors))


def _probability(raw: float, err: float, terms: int, method: str) -> MetricResult:
    if raw < 0 or raw > 1:
        clipped = min(max(raw, 0.0), 1.0)
        if abs(raw - clipped) > _CLAMP_SLACK:
            raise NumericError(f"probability {raw!r} outside [0, 1] beyond round-off", partial=raw)
        return MetricResult(clipped, err + abs(raw - clipped), terms, method, clamped=True)
    return MetricResult(float(raw), float(err), int(terms), method)


def threshold_phi(rate_target: float) -> float:
    """SNR threshold ``2**R_t`` matching a secrecy rate in bits/s/Hz."""
    r = float(rate_target)
    if not math.isfinite(r) or r < 0:
        raise DomainError(f"rate_target must be finite and >= 0, got {r}")
    return 2.0 ** r


def diversity_gain(main: ChannelParams) -> float:
    """High-SNR outage slope ``alpha_tilde * mu`` of the main link."""
    return main.alpha / 2.0 * main.mu


def _require_common_alpha(s: SecrecyScenario, what: str):
    if s.main.alpha != s.eve.alpha:
        raise PreconditionError(
            f"{what} assumes a common alpha on both links (main {s.main.alpha}, eve {s.eve.alpha})"
        )


# ---------------------------------------------------------------------------
# quadrature over one link


def _expect(mix, g, epsrel: float, epsabs: float, max_intervals: int = 20000):
    """``E[g(x)]`` for the mixture variable of ``mix`` by adaptive Gauss-Kronrod.

    ``g`` receives x-values. Substituting ``x = X u**p`` with ``p = 1/mu``
    for ``mu < 1`` removes the ``x**(mu-1)`` endpoint singularity.
    """
    X = mix.upper_x(_TAIL_MASS)
    p = 1.0 / mix.mu if mix.mu < 1 else 1.0

    def f(u):
        x = X * u ** p
        jac = X * p * u ** (p - 1.0) if p != 1.0 else X
        out = np.zeros_like(u)
        ok = x > 0
        out[ok] = g(x[ok]) * mix.pdf_x(x[ok]) * (jac[ok] if np.ndim(jac) else jac)
        return out

    mean = mix.mean_x()
    pts = [(q * mean / X) ** (1.0 / p) for q in (0.125, 0.5, 1.0, 2.0, 8.0) if q * mean < X]
    return integrate(f, 0.0, 1.0, points=pts, epsabs=epsabs, epsrel=epsrel, max_intervals=max_intervals)


def sop_lower_numeric(s: SecrecyScenario, *, epsrel: float = 1e-10, epsabs: float = 1e-300) -> MetricResult:
    """Outage lower bound ``E_k[F_h(phi gamma_k)]`` by adaptive quadrature.

    Works for any parameters, including different alphas on the two links.
    The reported error adds the quadrature estimate and the neglected tail
    mass of the eavesdropper link.
    """
    phi = threshold_phi(s.rate_target)
    mh, mk = _mixture(s.main), _mixture(s.eve)

    def g(xk):
        gam = mk.x_to_gamma(xk) * phi
        return mh.cdf_x(mh.gamma_to_x(gam), EXACT)

    try:
        r = _expect(mk, g, epsrel, epsabs)
    except NumericError as exc:
        raise NumericError(f"SOP quadrature failed: {exc}", partial=exc.partial) from exc
    return _probability(r.value, r.error + _TAIL_MASS, r.evals, "quadrature")


# ---------------------------------------------------------------------------
# series forms


def _exact_table(s: SecrecyScenario, n: int) -> np.ndarray:
    """Terms ``T[jh, jk]`` (inner ``l``-sum done) of the double series, ``n x n``."""
    ph, pk = s.main, s.eve
    dh, dk = derive_constants(ph), derive_constants(pk)
    at = dh.alpha_tilde
    mu_h, mu_k = int(round(ph.mu)), pk.mu
    j = np.arange(n, dtype=float)
    # log B_h(jh) and log [A_k(jk) d_k^jk / jk!]
    jlogd_h = j * math.log(dh.d) if dh.d > 0 else np.where(j == 0, 0.0, -np.inf)
    log_bh = (
        log_poch_table(ph.m, n) - log_poch_table(ph.mu, n)
        + jlogd_h + gammaln(mu_h + j) - (mu_h + j) * dh.log_b - gammaln(j + 1.0)
    )
    jlogd_k = j * math.log(dk.d) if dk.d > 0 else np.where(j == 0, 0.0, -np.inf)
    log_wk = log_poch_table(pk.m, n) - log_poch_table(pk.mu, n) + jlogd_k - gammaln(j + 1.0)

    log_B = dh.log_b + at * s.rate_target * math.log(2.0)  # log(b_h phi^at)
    log_s = np.logaddexp(dk.log_b, log_B)  # log(b_k + b_h phi^at)
    l = np.arange(mu_h + n - 1, dtype=float)[:, None]
    e = mu_k + j[None, :] + l
    log_g = l * log_B - gammaln(l + 1.0) + log_wk[None, :] + gammaln(e) - e * log_s
    # prefix over l: row L-1 holds the sum over l < L
    log_cum = np.logaddexp.accumulate(log_g, axis=0)
    log_c = dh.log_a + dk.log_a - 2.0 * math.log(at)
    rows = (mu_h + j - 1).astype(int)
    return np.exp(log_c + log_bh[:, None] + log_cum[rows, :])


def sop_lower_exact(s: SecrecyScenario, ctrl: SeriesControl = SeriesControl()) -> MetricResult:
    """Double-series outage lower bound (integer ``mu`` on the main link).

    ``1 - (a_h a_k / at^2) sum_jh sum_l [B_h(jh) phi^(at l) b_h^l / l!]
    sum_jk A_k(jk) d_k^jk Gamma(mu_k+jk+l) / (jk! (b_k + b_h phi^at)^(mu_k+jk+l))``,
    summed in log space. Keeping ``jh, jk < n`` overstates the result by at
    most ``P(J_h >= n) + P(J_k >= n)``. The series stops at the first
    ``n >= 3`` where that bound is below ``rel_tol`` times the value.
    """
    _require_common_alpha(s, "sop_lower_exact")
    if not is_integer_mu(s.main.mu):
        raise PreconditionError(f"sop_lower_exact needs integer mu on the main link (got {s.main.mu})")
    mh, mk = _mixture(s.main), _mixture(s.eve)
    n_min = max(mh.min_terms(), mk.min_terms())
    n_try = min(32, ctrl.max_terms)
    while True:
        T = _exact_table(s, n_try)
        S = np.cumsum(np.cumsum(T, axis=0), axis=1).diagonal()
        n = np.arange(1, n_try + 1)
        bound = mh.tail(n) + mk.tail(n)
        ok = (bound <= ctrl.rel_tol * (1.0 - S)) & (n >= n_min)
        if ok.any():
            k = int(np.argmax(ok))
            break
        if n_try >= ctrl.max_terms:
            if ctrl.max_terms >= ctrl.hard_cap:
                raise ConvergenceError(
                    f"SOP double series not converged within hard cap {ctrl.hard_cap}",
                    partial=1.0 - float(S[-1]),
                    terms=ctrl.hard_cap,
                )
            k = n_try - 1
            break
        n_try = min(4 * n_try, ctrl.max_terms)
    nn = k + 1
    total = math.fsum(T[:nn, :nn].ravel().tolist())
    raw = 1.0 - total
    err = float(bound[k]) + 64 * np.finfo(float).eps
    used = (1 if mh.z == 0 else nn) * (1 if mk.z == 0 else nn)
    return _probability(raw, err, used, "series")


def sop_asymptotic(s: SecrecyScenario, ctrl: SeriesControl = SeriesControl()) -> MetricResult:
    """High-SNR outage lower bound for ``gamma_bar_h -> infinity``.

    ``(a'_h a'_k / (at^2 mu_h)) (phi gamma_bar_k / gamma_bar_h)^(at mu_h)
    sum_jk A_k d'^jk Gamma(mu_h+mu_k+jk) / (jk! b'_k^(mu_h+mu_k+jk))``.
    The printed closed form carries ``alpha * mu_h`` as the exponent of
    ``phi`` and of the SNR ratio; the small-argument CDF ``~ gamma^(at mu_h)``
    forces ``at * mu_h``, which is used here.
    """
    _require_common_alpha(s, "sop_asymptotic")
    ph, pk = s.main, s.eve
    ah, ak = asymptotic_constants(ph), asymptotic_constants(pk)
    at = ph.alpha / 2.0
    G = at * ph.mu
    z = derive_constants(pk).z
    nu = ph.mu + pk.mu
    log_dp = math.log(ak.d_prime) if ak.d_prime > 0 else -np.inf
    base = ak.log_a_prime - math.log(at)
    min_terms = 1 if z == 0 else 3

    def block(idx, j0, j1):
        j = np.arange(j0, j1 + 1, dtype=float)
        la = log_poch_table(pk.m, j1 + 1)[j0:] - log_poch_table(pk.mu, j1 + 1)[j0:]
        jl = j * log_dp if z > 0 else np.where(j == 0, 0.0, -np.inf)
        lt = base + la + jl - gammaln(j + 1.0) + gammaln(nu + j) - (nu + j) * ak.log_b_prime
        t = np.exp(lt)[None, :]
        n = j[1:]
        rho = z * np.maximum(1.0, (pk.m + n) / (n + 1.0)) * (nu + n) / (pk.mu + n)
        with np.errstate(divide="ignore"):
            bd = np.where(rho < 1, t[:, 1:] / (1.0 - rho), np.inf)
        bd = np.where(t[:, 1:] == 0, 0.0, bd)
        return t[:, :-1], bd

    total, used, bound = _sum_series(block, 1, ctrl, min_terms, "asymptotic SOP series")
    log_pref = (
        ah.log_a_prime
        - math.log(G)
        + G * (s.rate_target * math.log(2.0) + math.log(pk.mean_snr) - math.log(ph.mean_snr))
    )
    pref = math.exp(log_pref)
    return MetricResult(float(pref * total[0]), float(pref * bound[0]), int(used[0]), "asymptotic")


def spsc(s: SecrecyScenario, ctrl: SeriesControl = SeriesControl()) -> MetricResult:
    """Probability of a strictly positive secrecy capacity, ``1 - SOP_L(R_t = 0)``.

    Uses the double series when its preconditions hold, quadrature otherwise.
    """
    s0 = s.with_rate(0.0)
    if s.main.alpha == s.eve.alpha and is_integer_mu(s.main.mu):
        sop = sop_lower_exact(s0, ctrl)
    else:
        sop = sop_lower_numeric(s0)
    return MetricResult(1.0 - sop.value, sop.error_estimate, sop.terms_or_evals, sop.method, sop.clamped)


def asc(s: SecrecyScenario, ctrl: SeriesControl = SeriesControl(), *, epsrel: float = 1e-10,
        epsabs: float = 1e-12) -> AscBreakdown:
    """Average secrecy capacity ``I1 + I2 - I3`` from its defining integrals.

    ``I1 = E[ln(1+g_h) F_k(g_h)]``, ``I2 = E[ln(1+g_k) F_h(g_k)]`` and
    ``I3 = E[ln(1+g_k)]``. Their combination equals
    ``E[(ln(1+g_h) - ln(1+g_k))^+]``. The CDFs inside the integrands stop
    at ``ctrl.max_terms``. Cutting a CDF series at ``n`` terms loses at most
    the weight tail ``P(J >= n)``, and ``E[ln(1+g)] <= ln(1 + gamma_bar)``
    (Jensen), which gives the truncation part of each error.
    """
    _require_common_alpha(s, "asc")
    mh, mk = _mixture(s.main), _mixture(s.eve)
    inner = SeriesControl(max_terms=ctrl.max_terms, rel_tol=EXACT.rel_tol, hard_cap=ctrl.hard_cap)
    cut_h = max(float(mh.tail(ctrl.max_terms)), EXACT.rel_tol)
    cut_k = max(float(mk.tail(ctrl.max_terms)), EXACT.rel_tol)
    trunc = (cut_k * math.log1p(s.main.mean_snr), cut_h * math.log1p(s.eve.mean_snr), 0.0)

    def cap(own, other):
        def g(x):
            gam = own.x_to_gamma(x)
            return np.log1p(gam) * other.cdf_x(other.gamma_to_x(gam), inner)
        return g

    def plain(own):
        return lambda x: np.log1p(own.x_to_gamma(x))

    results = []
    for name, mix, g in (("I1", mh, cap(mh, mk)), ("I2", mk, cap(mk, mh)), ("I3", mk, plain(mk))):
        try:
            results.append(_expect(mix, g, epsrel, epsabs))
        except NumericError as exc:
            raise NumericError(f"ASC integral {name} failed: {exc}", partial=exc.partial) from exc
    i1, i2, i3 = (r.value for r in results)
    # ln(1+gamma) grows slowly; bound its contribution from the neglected tail mass
    tail = _TAIL_MASS * 200.0
    nats = i1 + i2 - i3
    return AscBreakdown(
        im1=i1,
        im2=i2,
        im3=i3,
        asc_nats=nats,
        asc_bits=nats / math.log(2.0),
        errors=tuple(r.error + tail + t for r, t in zip(results, trunc)),
        evals=sum(r.evals for r in results),
    )
