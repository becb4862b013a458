"""Single-link alpha-kappa-mu shadowed (AKMS) SNR distribution.

Most of the work happens in the variable ``x = b * gamma**alpha_tilde``.
There the AKMS law is a Gamma mixture: ``x ~ Gamma(mu + J, 1)`` with ``J``
negative-binomial, ``P(J = j) = W_j = (1-z)^m (m)_j z^j / j!`` and
``z = mu*kappa / (mu*kappa + m) = d / b``. The weights are rebuilt from the
constants ``a, b, d`` so the closed forms and the mixture view share one
code path, and that view gives exact remainder bounds for every series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import betainc, gammaln

from .errors import ConvergenceError, DomainError, NumericError, PreconditionError
from .specfun import AccuracyBudget, hyp2f1, ln_gamma, log_hyp1f1_pos, log_poch_table, reg_inc_gamma

__all__ = [
    "ChannelParams",
    "DerivedConstants",
    "AsymptoticConstants",
    "SeriesControl",
    "SeriesResult",
    "EXACT",
    "derive_constants",
    "asymptotic_constants",
    "pdf",
    "log_pdf",
    "pdf_series",
    "cdf_general",
    "cdf_general_detail",
    "sf_general",
    "cdf_series",
    "cdf_series_detail",
    "cdf_asymptotic",
    "sample_inverse_cdf",
    "is_integer_mu",
]

_INT_TOL = 1e-9
_KERNEL = AccuracyBudget(rel_tol=1e-15, max_terms=20000)
_HYP2F1_BUDGET = AccuracyBudget(rel_tol=1e-15, max_terms=20000)
_PDF_BUDGET = AccuracyBudget(rel_tol=1e-15, max_terms=400000)
_LOG_UNDERFLOW = -760.0


def _check_positive(name: str, v: float) -> float:
    v = float(v)
    if not math.isfinite(v) or v <= 0:
        raise DomainError(f"{name} must be finite and > 0, got {v}")
    return v


@dataclass(frozen=True)
class ChannelParams:
    """Shape and scale parameters of one AKMS link. ``mean_snr`` is linear."""

    alpha: float
    kappa: float
    mu: float
    m: float
    mean_snr: float

    def __post_init__(self):
        for name in ("alpha", "mu", "m", "mean_snr"):
            object.__setattr__(self, name, _check_positive(name, getattr(self, name)))
        k = float(self.kappa)
        if not math.isfinite(k) or k < 0:
            raise DomainError(f"kappa must be finite and >= 0, got {k}")
        object.__setattr__(self, "kappa", k)

    @classmethod
    def from_db(cls, alpha: float, kappa: float, mu: float, m: float, mean_snr_db: float) -> ChannelParams:
        return cls(alpha, kappa, mu, m, 10.0 ** (float(mean_snr_db) / 10.0))

    def replace(self, **changes) -> ChannelParams:
        fields = dict(alpha=self.alpha, kappa=self.kappa, mu=self.mu, m=self.m, mean_snr=self.mean_snr)
        fields.update(changes)
        return ChannelParams(**fields)


@dataclass(frozen=True)
class DerivedConstants:
    """Density constants ``c, a, b, d`` plus their logs and ``z = d / b``."""

    alpha_tilde: float
    c: float
    a: float
    b: float
    d: float
    log_c: float
    log_a: float
    log_b: float
    z: float


@dataclass(frozen=True)
class AsymptoticConstants:
    """``a, b, d`` re-evaluated at unit mean SNR."""

    a_prime: float
    b_prime: float
    d_prime: float
    log_a_prime: float
    log_b_prime: float


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for the j-series.

    A series stops at the first ``n >= 3`` whose remainder bound is below
    ``rel_tol`` times the partial sum. If that has not happened by
    ``max_terms`` the truncated value is returned with its bound, unless
    ``max_terms`` already equals ``hard_cap``, which is an error.
    """

    max_terms: int = 20
    rel_tol: float = 1e-4
    hard_cap: int = 200

    def __post_init__(self):
        if int(self.max_terms) < 1 or int(self.hard_cap) < 1:
            raise DomainError("max_terms and hard_cap must be positive integers")
        if int(self.max_terms) > int(self.hard_cap):
            raise DomainError(f"max_terms={self.max_terms} exceeds hard_cap={self.hard_cap}")
        if not (self.rel_tol > 0):
            raise DomainError(f"rel_tol must be > 0, got {self.rel_tol}")
        object.__setattr__(self, "max_terms", int(self.max_terms))
        object.__setattr__(self, "hard_cap", int(self.hard_cap))


# Control used by oracles, quadrature integrands and the sampler.
EXACT = SeriesControl(max_terms=5000, rel_tol=1e-14, hard_cap=5000)


class SeriesResult(NamedTuple):
    value: float | np.ndarray
    terms_used: int
    trunc_estimate: float | np.ndarray


def is_integer_mu(mu: float) -> bool:
    return abs(mu - round(mu)) < _INT_TOL


# ---------------------------------------------------------------------------
# constants


def _log_c(alpha_tilde: float, kappa: float, mu: float, m: float) -> float:
    mk = mu * kappa
    z = mk / (mk + m)
    inv = 1.0 / alpha_tilde
    f = hyp2f1(m, mu + inv, mu, z, _HYP2F1_BUDGET)
    return alpha_tilde * (m * math.log1p(mk / m) + ln_gamma(mu) - ln_gamma(mu + inv) - math.log(f))


def _log_a(p: ChannelParams, log_c: float, mean_snr: float) -> float:
    at = p.alpha / 2.0
    return (
        -p.m * math.log1p(p.mu * p.kappa / p.m)
        + math.log(p.alpha)
        - math.log(2.0)
        - p.mu * log_c
        - ln_gamma(p.mu)
        # printed form has gamma_bar^(alpha~) * mu; unit mass needs gamma_bar^(alpha~ * mu)
        - at * p.mu * math.log(mean_snr)
    )


@lru_cache(maxsize=1024)
def derive_constants(p: ChannelParams) -> DerivedConstants:
    """Constants of the AKMS density, evaluated in log space."""
    at = p.alpha / 2.0
    log_c = _log_c(at, p.kappa, p.mu, p.m)
    log_a = _log_a(p, log_c, p.mean_snr)
    log_b = -log_c - at * math.log(p.mean_snr)
    mk = p.mu * p.kappa
    z = mk / (mk + p.m)
    b = math.exp(log_b)
    d = z * b if p.kappa > 0 else 0.0
    return DerivedConstants(at, math.exp(log_c), math.exp(log_a), b, d, log_c, log_a, log_b, z)


@lru_cache(maxsize=1024)
def asymptotic_constants(p: ChannelParams) -> AsymptoticConstants:
    dc = derive_constants(p.replace(mean_snr=1.0))
    return AsymptoticConstants(dc.a, dc.b, dc.d, dc.log_a, dc.log_b)


# ---------------------------------------------------------------------------
# mixture machinery in x-space


class _Mixture:
    """Gamma/negative-binomial view of one link."""

    def __init__(self, p: ChannelParams):
        dc = derive_constants(p)
        self.p = p
        self.dc = dc
        self.mu = p.mu
        self.m = p.m
        self.z = dc.z
        self.alpha_tilde = dc.alpha_tilde
        # log W_0 from a, b: equals m*log(1-z) when a is correctly normalized
        self.log_w0 = dc.log_a - math.log(dc.alpha_tilde) + ln_gamma(p.mu) - p.mu * dc.log_b

    def min_terms(self) -> int:
        return 1 if self.z == 0 else 3

    def log_weights(self, n: int) -> np.ndarray:
        if self.z == 0:
            out = np.full(n, -np.inf)
            out[0] = self.log_w0
            return out
        j = np.arange(n, dtype=float)
        return self.log_w0 + log_poch_table(self.m, n) + j * math.log(self.z) - gammaln(j + 1.0)

    def tail(self, n) -> np.ndarray:
        """``P(J >= n)`` for integer ``n >= 0``."""
        n = np.asarray(n, dtype=float)
        if self.z == 0:
            return np.where(n <= 0, 1.0, 0.0)
        safe = np.maximum(n, 1.0)
        return np.where(n <= 0, 1.0, betainc(safe, self.m, self.z))

    def gamma_to_x(self, gamma):
        g = np.asarray(gamma, dtype=float)
        with np.errstate(divide="ignore"):
            return np.exp(self.dc.log_b + self.alpha_tilde * np.log(g))

    def x_to_gamma(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.exp((np.log(x) - self.dc.log_b) / self.alpha_tilde)

    def log_mgf(self, theta):
        """log E[exp(theta x)] for ``0 <= theta < 1 - z``."""
        theta = np.asarray(theta, dtype=float)
        out = -self.mu * np.log1p(-theta)
        if self.z > 0:
            out = out + self.m * (math.log1p(-self.z) - np.log1p(-self.z / (1.0 - theta)))
        return out

    def _thetas(self):
        return (1.0 - self.z) * np.array([0.5, 0.8, 0.9, 0.95, 0.98, 0.99, 0.995])

    def log_pdf_bound(self, x):
        """Upper bound on ``log f_x(x)`` valid for ``x >= 1``."""
        th = self._thetas()[:, None]
        x = np.asarray(x, dtype=float)[None, :]
        lead = max(self.mu - 1.0, 0.0) * -np.log1p(-th)
        weights = 0.0
        if self.z > 0:
            weights = self.m * (math.log1p(-self.z) - np.log1p(-self.z / (1.0 - th)))
        return np.min(-th * x + lead + weights, axis=0)

    def upper_x(self, eps: float = 1e-22) -> float:
        """A point beyond which the mixture carries less than ``eps`` mass (Chernoff)."""
        th = self._thetas()
        return float(np.min((-math.log(eps) + self.log_mgf(th)) / th))

    def mean_x(self) -> float:
        return self.mu + (self.m * self.z / (1.0 - self.z) if self.z > 0 else 0.0)

    def log_pdf_x(self, x):
        """Log density of ``x``; exact series, clipped to ``-inf`` below double range."""
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, -np.inf)
        pos = (x > 0) & np.isfinite(x)
        if self.mu <= 1:
            out[x == 0] = self.log_w0 if self.mu == 1 else np.inf
        if not pos.any():
            return out
        xp = x[pos]
        live = np.ones(xp.shape, dtype=bool)
        big = xp >= 1
        if big.any():
            live[big] = self.log_pdf_bound(xp[big]) > _LOG_UNDERFLOW
        vals = np.full(xp.shape, -np.inf)
        xl = xp[live]
        if xl.size:
            hyp = log_hyp1f1_pos(self.m, self.mu, self.z * xl, _PDF_BUDGET) if self.z > 0 else 0.0
            vals[live] = self.log_w0 - ln_gamma(self.mu) + (self.mu - 1.0) * np.log(xl) - xl + hyp
        out[pos] = vals
        return out

    def pdf_x(self, x):
        return np.exp(self.log_pdf_x(x))

    def _gamma_block(self, x, j0, j1, upper: bool):
        """``P`` (or ``Q``) at shapes ``mu+j0 .. mu+j1`` from one anchor column.

        Neighbouring shapes differ by the Poisson term ``x^s e^-x / Gamma(s+1)``;
        Q is carried upward and P downward, so only positive terms are added.
        """
        s = self.mu + np.arange(j0, j1 + 1, dtype=float)
        x = x[:, None]
        with np.errstate(divide="ignore"):
            lx = np.log(x)
        step = np.exp(s[None, :-1] * lx - x - gammaln(s[None, :-1] + 1.0))
        if upper:
            q0 = reg_inc_gamma(s[0], x, _KERNEL)[1]
            return np.concatenate((q0, q0 + np.cumsum(step, axis=1)), axis=1)
        ptop = reg_inc_gamma(s[-1], x, _KERNEL)[0]
        return np.concatenate((ptop + np.cumsum(step[:, ::-1], axis=1)[:, ::-1], ptop), axis=1)

    def series(self, x, ctrl: SeriesControl, upper: bool = False):
        """``sum_j W_j P(mu+j, x)`` (or with Q when ``upper``) with remainder bounds.

        Remainder after ``n`` terms is at most ``P(mu+n, x) * P(J >= n)``
        for the lower form (P falls with its shape argument) and
        ``P(J >= n)`` for the upper one (Q <= 1).
        """
        x = np.asarray(x, dtype=float)
        logw = self.log_weights(ctrl.max_terms + 1)
        w = np.exp(logw)

        def block(idx, j0, j1):
            g = self._gamma_block(x[idx], j0, j1, upper)
            terms = g[:, :-1] * w[None, j0:j1]
            tails = self.tail(np.arange(j0 + 1, j1 + 1))
            bounds = tails[None, :] * (1.0 if upper else g[:, 1:])
            return terms, np.broadcast_to(bounds, terms.shape)

        return _sum_series(block, x.size, ctrl, self.min_terms(), "mixture CDF series")

    def cdf_x(self, x, ctrl: SeriesControl = EXACT):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        fin = np.isfinite(x) & (x > 0)
        out[np.isinf(x)] = 1.0
        if fin.any():
            val, _, _ = self.series(x[fin], ctrl, upper=False)
            out[fin] = val
        return out

    def sf_x(self, x, ctrl: SeriesControl = EXACT):
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape)
        out[np.isinf(x)] = 0.0
        fin = np.isfinite(x) & (x > 0)
        if fin.any():
            val, _, _ = self.series(x[fin], ctrl, upper=True)
            out[fin] = val
        return out


@lru_cache(maxsize=256)
def _mixture(p: ChannelParams) -> _Mixture:
    return _Mixture(p)


def _sum_series(block, npts: int, ctrl: SeriesControl, min_terms: int, label: str, absolute: bool = False):
    """Sum positive-term series for ``npts`` points in growing blocks.

    ``block(idx, j0, j1)`` returns the terms ``j0..j1-1`` for the points
    ``idx`` and remainder bounds after ``n = j0+1..j1`` terms.
    """
    total = np.zeros(npts)
    bound = np.full(npts, np.inf)
    used = np.zeros(npts, dtype=int)
    active = np.ones(npts, dtype=bool)
    j0, size = 0, 8
    while active.any() and j0 < ctrl.max_terms:
        j1 = min(j0 + size, ctrl.max_terms)
        idx = np.nonzero(active)[0]
        terms, bds = block(idx, j0, j1)
        partial = total[idx, None] + np.cumsum(terms, axis=1)
        n = np.arange(j0 + 1, j1 + 1)
        limit = ctrl.rel_tol if absolute else ctrl.rel_tol * partial
        ok = (bds <= limit) & (n >= min_terms)[None, :]
        hit = ok.any(axis=1)
        first = np.where(hit, np.argmax(ok, axis=1), terms.shape[1] - 1)
        rows = np.arange(idx.size)
        total[idx] = partial[rows, first]
        bound[idx] = bds[rows, first]
        used[idx] = n[first]
        active[idx[hit]] = False
        j0 = j1
        size = min(2 * size, 256)
    if active.any() and ctrl.max_terms >= ctrl.hard_cap:
        raise ConvergenceError(
            f"{label} not converged after hard cap of {ctrl.hard_cap} terms",
            partial=total.copy(),
            terms=ctrl.hard_cap,
        )
    return total, used, bound


# ---------------------------------------------------------------------------
# public distribution functions


def _as_gamma(gamma, allow_zero: bool = True):
    g = np.asarray(gamma, dtype=float)
    if np.any(np.isnan(g)) or np.any(g < 0) or (not allow_zero and np.any(g == 0)):
        raise DomainError("gamma must be " + ("non-negative" if allow_zero else "positive"))
    return g


def _out(arr, like):
    arr = np.asarray(arr)
    return float(arr) if np.ndim(like) == 0 else arr


def log_pdf(p: ChannelParams, gamma):
    """Log of the SNR density ``a g^(at*mu-1) exp(-b g^at) 1F1(m; mu; d g^at)``."""
    g = _as_gamma(gamma)
    dc = derive_constants(p)
    mix = _mixture(p)
    g1 = np.atleast_1d(g)
    out = np.full(g1.shape, -np.inf)
    pos = (g1 > 0) & np.isfinite(g1)
    if pos.any():
        gp = g1[pos]
        x = mix.gamma_to_x(gp)
        live = np.ones(gp.shape, dtype=bool)
        big = x >= 1
        if big.any():
            extra = math.log(dc.alpha_tilde) + np.log(x[big]) - np.log(gp[big])
            live[big] = mix.log_pdf_bound(x[big]) + extra > _LOG_UNDERFLOW
        vals = np.full(gp.shape, -np.inf)
        gl, xl = gp[live], x[live]
        if gl.size:
            hyp = log_hyp1f1_pos(p.m, p.mu, dc.z * xl, _PDF_BUDGET) if dc.d > 0 else 0.0
            vals[live] = dc.log_a + (dc.alpha_tilde * p.mu - 1.0) * np.log(gl) - xl + hyp
        out[pos] = vals
    zero = g1 == 0
    if zero.any():
        e = dc.alpha_tilde * p.mu - 1.0
        out[zero] = -np.inf if e > 0 else (dc.log_a if e == 0 else np.inf)
    return _out(out.reshape(g.shape), gamma)


def pdf(p: ChannelParams, gamma):
    """AKMS SNR density at ``gamma`` (scalar or array)."""
    return _out(np.exp(np.asarray(log_pdf(p, gamma))), gamma)


def pdf_series(p: ChannelParams, gamma, ctrl: SeriesControl = SeriesControl()) -> SeriesResult:
    """Density from its j-series expansion with a rigorous remainder bound.

    After ``n`` terms the remainder is at most ``t_n / (1 - rho_n)`` with
    ``rho_n = y max(1, (m+n)/(mu+n)) / (n+1)``, ``y = d g^at``, which bounds
    every later term ratio.
    """
    g = _as_gamma(gamma, allow_zero=False)
    dc = derive_constants(p)
    mix = _mixture(p)
    g1 = np.atleast_1d(g).ravel()
    x = mix.gamma_to_x(g1)
    y = dc.z * x
    base = dc.log_a + (dc.alpha_tilde * p.mu - 1.0) * np.log(g1) - x
    log_aj = log_poch_table(p.m, ctrl.max_terms + 1) - log_poch_table(p.mu, ctrl.max_terms + 1)
    with np.errstate(divide="ignore"):
        logy = np.log(y)

    def block(idx, j0, j1):
        j = np.arange(j0, j1 + 1, dtype=float)
        if dc.d > 0:
            lt = base[idx, None] + log_aj[None, j0:j1 + 1] + j[None, :] * logy[idx, None] - gammaln(j + 1.0)[None, :]
        else:
            lt = np.where(j[None, :] == 0, base[idx, None], -np.inf)
        t = np.exp(lt)
        nn = j[1:]
        rho = y[idx, None] * np.maximum(1.0, (p.m + nn) / (p.mu + nn))[None, :] / (nn + 1.0)[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            bd = np.where(rho < 1, t[:, 1:] / (1.0 - rho), np.inf)
        bd = np.where(t[:, 1:] == 0, 0.0, bd)
        return t[:, :-1], bd

    val, used, bd = _sum_series(block, g1.size, ctrl, mix.min_terms(), "density series")
    shape = np.shape(g)
    return SeriesResult(_out(val.reshape(shape), gamma), int(used.max()), _out(bd.reshape(shape), gamma))


def cdf_general_detail(p: ChannelParams, gamma, ctrl: SeriesControl = SeriesControl()) -> SeriesResult:
    """Lower-incomplete-gamma series for the CDF, any real ``mu > 0``."""
    g = _as_gamma(gamma)
    mix = _mixture(p)
    g1 = np.atleast_1d(g).ravel()
    out = np.zeros(g1.shape)
    bd = np.zeros(g1.shape)
    used = 0
    out[np.isinf(g1)] = 1.0
    fin = np.isfinite(g1) & (g1 > 0)
    if fin.any():
        v, u, b = mix.series(mix.gamma_to_x(g1[fin]), ctrl, upper=False)
        out[fin], bd[fin], used = v, b, int(u.max())
    shape = np.shape(g)
    return SeriesResult(_out(out.reshape(shape), gamma), used, _out(bd.reshape(shape), gamma))


def cdf_general(p: ChannelParams, gamma, ctrl: SeriesControl = SeriesControl()):
    return cdf_general_detail(p, gamma, ctrl).value


def sf_general(p: ChannelParams, gamma, ctrl: SeriesControl = SeriesControl()):
    """Survival function ``1 - F`` summed directly (accurate in the upper tail)."""
    g = _as_gamma(gamma)
    mix = _mixture(p)
    return _out(mix.sf_x(mix.gamma_to_x(g), ctrl), gamma)


def cdf_series_detail(p: ChannelParams, gamma, ctrl: SeriesControl = SeriesControl()) -> SeriesResult:
    """Finite-sum CDF for integer ``mu``: ``1 - (a/at) sum_j B_j exp(-x) sum_l x^l / l!``.

    Truncating the outer sum leaves ``1 - (partial sum)`` too large by at most
    ``P(J >= n)``, so that weight tail is the (absolute) remainder bound.
    """
    if not is_integer_mu(p.mu):
        raise PreconditionError(f"cdf_series needs integer mu (got {p.mu}); use cdf_general")
    g = _as_gamma(gamma)
    dc = derive_constants(p)
    mix = _mixture(p)
    mu = int(round(p.mu))
    g1 = np.atleast_1d(g).ravel()
    x = mix.gamma_to_x(g1)
    nmax = ctrl.max_terms
    # log B_j = log A_j + j log d + log (mu+j-1)! - (mu+j) log b - log j!
    j = np.arange(nmax + 1, dtype=float)
    log_aj = log_poch_table(p.m, nmax + 1) - log_poch_table(p.mu, nmax + 1)
    jlogd = j * math.log(dc.d) if dc.d > 0 else np.where(j == 0, 0.0, -np.inf)
    log_bj = log_aj + jlogd + gammaln(mu + j) - (mu + j) * dc.log_b - gammaln(j + 1.0)
    coef = np.exp(math.log(dc.alpha_tilde) * -1 + dc.log_a + log_bj)
    tails = mix.tail(np.arange(1, nmax + 2))
    fin = np.isfinite(x)
    xs = np.where(fin, x, 0.0)
    with np.errstate(divide="ignore"):
        logx = np.log(xs)

    def block(idx, j0, j1):
        # Poisson partial sums e^-x sum_{l < mu+j} x^l / l! for j in [j0, j1)
        lmax = mu + j1 - 1
        ll = np.arange(lmax, dtype=float)
        with np.errstate(invalid="ignore"):
            lt = np.where(ll[None, :] == 0, 0.0, ll[None, :] * logx[idx, None]) - xs[idx, None] - gammaln(ll + 1.0)[None, :]
        cums = np.cumsum(np.exp(lt), axis=1)
        poisson = cums[:, mu + np.arange(j0, j1) - 1]
        terms = coef[None, j0:j1] * poisson
        return terms, np.broadcast_to(tails[None, j0:j1], terms.shape)

    s, used, bd = _sum_series(block, g1.size, ctrl, mix.min_terms(), "finite-sum CDF series", absolute=True)
    val = np.where(fin, 1.0 - s, 1.0)
    shape = np.shape(g)
    return SeriesResult(_out(val.reshape(shape), gamma), int(used.max()), _out(bd.reshape(shape), gamma))


def cdf_series(p: ChannelParams, gamma, ctrl: SeriesControl = SeriesControl()):
    return cdf_series_detail(p, gamma, ctrl).value


def cdf_asymptotic(p: ChannelParams, gamma):
    """Leading small-argument term ``(a / (at mu)) g^(at mu)`` of the CDF."""
    g = _as_gamma(gamma)
    dc = derive_constants(p)
    with np.errstate(divide="ignore"):
        v = np.exp(dc.log_a - math.log(dc.alpha_tilde * p.mu) + dc.alpha_tilde * p.mu * np.log(g))
    return _out(v, gamma)


# ---------------------------------------------------------------------------
# inverse CDF


def _solve_x(mix: _Mixture, u, ctrl: SeriesControl = EXACT, tol: float = 1e-13, max_iter: int = 200):
    """Vectorized root of ``F_x(x) = u`` by bracketing plus safeguarded Newton.

    Residuals use the lower series below the median and the upper one above
    it, so ``u`` near 1 keeps its relative accuracy in ``1 - u``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0) | ~(u < 1)):
        raise DomainError("u must lie strictly inside (0, 1)")
    upper = u > 0.5
    target = np.where(upper, 1.0 - u, u)

    def resid(idx, x):
        r = np.empty(x.shape)
        up = upper[idx]
        if (~up).any():
            r[~up] = mix.cdf_x(x[~up], ctrl) - target[idx][~up]
        if up.any():
            r[up] = target[idx][up] - mix.sf_x(x[up], ctrl)
        return r

    n = u.size
    lo = np.zeros(n)
    hi = np.full(n, max(mix.mean_x(), 1.0))
    idx_all = np.arange(n)
    r_hi = resid(idx_all, hi)
    for _ in range(200):
        need = r_hi < 0
        if not need.any():
            break
        lo[need] = hi[need]
        hi[need] *= 4.0
        r_hi[need] = resid(idx_all[need], hi[need])
    else:
        raise NumericError("inverse CDF bracketing failed", partial=u[r_hi < 0])
    # geometric midpoint start behaves better across decades
    x = np.where(lo > 0, np.sqrt(lo * hi), hi * 0.5)
    active = np.ones(n, dtype=bool)
    for _ in range(max_iter):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        xi = x[idx]
        r = resid(idx, xi)
        f = mix.pdf_x(xi)
        neg = r < 0
        lo[idx[neg]] = xi[neg]
        hi[idx[~neg]] = xi[~neg]
        conv = np.abs(r) <= tol * np.maximum(target[idx], 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = xi - r / f
        l, h = lo[idx], hi[idx]
        bad = ~np.isfinite(step) | (step <= l) | (step >= h)
        mid = np.where(l > 0, np.sqrt(l * h), 0.5 * h)
        mid = np.where((l > 0) & (h / np.maximum(l, 1e-300) < 4.0), 0.5 * (l + h), mid)
        new = np.where(bad, mid, step)
        narrow = (h - l) <= 4 * np.finfo(float).eps * h
        done = conv | narrow
        x[idx] = np.where(done, xi, new)
        active[idx[done]] = False
    if active.any():
        raise NumericError("inverse CDF did not converge", partial=u[active])
    return x


def sample_inverse_cdf(p: ChannelParams, u, ctrl: SeriesControl = EXACT):
    """Quantile function: ``gamma`` with ``cdf_general(gamma) = u``.

    The solve always runs with at least the exact series control; ``ctrl``
    can only tighten it.
    """
    u_arr = np.asarray(u, dtype=float)
    tight = SeriesControl(
        max_terms=max(ctrl.hard_cap, EXACT.hard_cap),
        rel_tol=min(ctrl.rel_tol, EXACT.rel_tol),
        hard_cap=max(ctrl.hard_cap, EXACT.hard_cap),
    )
    mix = _mixture(p)
    x = _solve_x(mix, u_arr.ravel(), tight)
    return _out(mix.x_to_gamma(x).reshape(u_arr.shape), u)
