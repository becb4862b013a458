"""Special-function kernel: log-gamma, incomplete gamma, 1F1 and 2F1.

All routines are pure functions of their arguments. Scalar entry points
(`ln_gamma`, `lower_inc_gamma`, `hyp1f1`, `hyp2f1`) follow the textbook
definitions; the array helpers further down are what the distribution code
uses in its inner loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln as _gammaln

from .errors import ConvergenceError, DomainError

__all__ = [
    "AccuracyBudget",
    "DEFAULT_BUDGET",
    "ln_gamma",
    "lower_inc_gamma",
    "upper_inc_gamma",
    "reg_inc_gamma",
    "hyp1f1",
    "log_hyp1f1_pos",
    "hyp2f1",
    "log_poch_table",
]

_FPMIN = 1e-300


@dataclass(frozen=True)
class AccuracyBudget:
    """Relative tolerance and term cap for a single special-function call."""

    rel_tol: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not (self.rel_tol > 0):
            raise DomainError(f"rel_tol must be positive, got {self.rel_tol}")
        if int(self.max_terms) < 1:
            raise DomainError(f"max_terms must be >= 1, got {self.max_terms}")


DEFAULT_BUDGET = AccuracyBudget()


def _is_nonpos_int(v: float) -> bool:
    return v <= 0 and float(v).is_integer()


def ln_gamma(x: float) -> float:
    """Natural log of the gamma function for real ``x > 0``."""
    x = float(x)
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"ln_gamma requires finite x > 0, got {x}")
    return math.lgamma(x)


def log_poch_table(a: float, n: int) -> np.ndarray:
    """``log((a)_k)`` for ``k = 0 .. n-1`` and ``a > 0``.

    Built from a running sum of ``log(a + i)`` rather than a difference of
    log-gammas, which loses digits once ``a`` is large (m ~ 1e6 happens in
    the Nakagami limit).
    """
    out = np.zeros(n)
    if n > 1:
        out[1:] = np.cumsum(np.log(a + np.arange(n - 1)))
    return out


# ---------------------------------------------------------------------------
# incomplete gamma


def reg_inc_gamma(s, x, budget: AccuracyBudget = DEFAULT_BUDGET):
    """Regularized incomplete gamma pair ``(P(s, x), Q(s, x))``, broadcasting.

    Series for ``x < s + 1`` (P accurate to full relative precision),
    Lentz continued fraction otherwise (Q accurate). The complement is
    formed by subtraction from one.
    """
    s, x = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(x, dtype=float))
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        raise DomainError("reg_inc_gamma requires finite s > 0")
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise DomainError("reg_inc_gamma requires x >= 0")
    p = np.zeros(s.shape)
    q = np.ones(s.shape)

    pos = x > 0
    big = np.isinf(x)
    p[big], q[big] = 1.0, 0.0
    use_series = pos & ~big & (x < s + 1)
    use_cf = pos & ~big & ~use_series

    if use_series.any():
        ss, xx = s[use_series], x[use_series]
        ps = _series_p(ss, xx, budget)
        p[use_series] = ps
        q[use_series] = 1.0 - ps
    if use_cf.any():
        ss, xx = s[use_cf], x[use_cf]
        qs = _cf_q(ss, xx, budget)
        q[use_cf] = qs
        p[use_cf] = 1.0 - qs
    return p, q


def _series_p(s, x, budget):
    ap = s.copy()
    term = 1.0 / s
    total = term.copy()
    active = np.ones(s.shape, dtype=bool)
    for _ in range(budget.max_terms):
        ap = ap + 1.0
        term = np.where(active, term * x / ap, term)
        total = np.where(active, total + term, total)
        active &= np.abs(term) > np.abs(total) * budget.rel_tol * 0.25
        if not active.any():
            break
    else:
        pref = np.exp(s * np.log(x) - x - _gammaln(s))
        raise ConvergenceError(
            "incomplete gamma series did not converge", partial=total * pref, terms=budget.max_terms
        )
    return np.exp(s * np.log(x) - x - _gammaln(s)) * total


def _cf_q(s, x, budget):
    b = x + 1.0 - s
    c = np.full(s.shape, 1.0 / _FPMIN)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(s.shape, dtype=bool)
    for i in range(1, budget.max_terms + 1):
        an = -i * (i - s)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _FPMIN, _FPMIN, d)
        c = b + an / c
        c = np.where(np.abs(c) < _FPMIN, _FPMIN, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active &= np.abs(delta - 1.0) > budget.rel_tol * 0.25
        if not active.any():
            break
    else:
        pref = np.exp(s * np.log(x) - x - _gammaln(s))
        raise ConvergenceError(
            "incomplete gamma continued fraction did not converge",
            partial=pref * h,
            terms=budget.max_terms,
        )
    return np.exp(s * np.log(x) - x - _gammaln(s)) * h


def _check_inc_args(s: float, x: float):
    s, x = float(s), float(x)
    if not math.isfinite(s) or s <= 0:
        raise DomainError(f"incomplete gamma requires s > 0, got {s}")
    if math.isnan(x) or x < 0:
        raise DomainError(f"incomplete gamma requires x >= 0, got {x}")
    return s, x


def lower_inc_gamma(s: float, x: float, budget: AccuracyBudget = DEFAULT_BUDGET) -> float:
    """Unregularized lower incomplete gamma ``int_0^x t^(s-1) e^-t dt``."""
    s, x = _check_inc_args(s, x)
    if x == 0:
        return 0.0
    p, _ = reg_inc_gamma(s, x, budget)
    return float(p) * math.exp(math.lgamma(s))


def upper_inc_gamma(s: float, x: float, budget: AccuracyBudget = DEFAULT_BUDGET) -> float:
    """Unregularized upper incomplete gamma ``Gamma(s) - lower_inc_gamma(s, x)``."""
    s, x = _check_inc_args(s, x)
    _, q = reg_inc_gamma(s, x, budget)
    return float(q) * math.exp(math.lgamma(s))


# ---------------------------------------------------------------------------
# confluent hypergeometric 1F1


def hyp1f1(a: float, b: float, z: float, budget: AccuracyBudget = DEFAULT_BUDGET) -> float:
    """Kummer's function ``1F1(a; b; z)`` for real arguments.

    Negative ``z`` is mapped through Kummer's transformation
    ``1F1(a; b; z) = e^z 1F1(b - a; b; -z)`` so the summed series always has
    a non-negative argument and (for ``a <= b``) no sign changes.
    """
    a, b, z = float(a), float(b), float(z)
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(z)):
        raise DomainError("hyp1f1 requires finite arguments")
    if _is_nonpos_int(b):
        raise DomainError(f"hyp1f1 undefined for non-positive integer b={b}")
    if z == 0 or a == 0:
        return 1.0
    if z < 0:
        sign, logmag = _hyp1f1_series(b - a, b, -z, budget)
        return sign * math.exp(logmag + z)
    sign, logmag = _hyp1f1_series(a, b, z, budget)
    return sign * math.exp(logmag)


def _hyp1f1_series(a, b, y, budget):
    """Signed log-magnitude of ``sum_n (a)_n / (b)_n y^n / n!`` for ``y > 0``."""
    logy = math.log(y)
    signs = [1.0]
    logs = [0.0]
    sgn, lt = 1.0, 0.0
    run = 1.0
    for n in range(budget.max_terms):
        fa = a + n
        if fa == 0:
            break
        sgn *= math.copysign(1.0, fa) * math.copysign(1.0, b + n)
        lt += math.log(abs(fa)) - math.log(abs(b + n)) + logy - math.log(n + 1)
        signs.append(sgn)
        logs.append(lt)
        lmax = max(logs)
        run = math.fsum(s_ * math.exp(l_ - lmax) for s_, l_ in zip(signs, logs))
        k = n + 1
        if a + k >= 0 and b + k > 0:
            rho = y * max(1.0, abs(a + k) / (b + k)) / (k + 1)
            if rho < 1:
                tail = math.exp(lt - lmax) * rho / (1 - rho)
                if tail <= budget.rel_tol * abs(run) * 0.5 or (run == 0 and tail == 0):
                    break
    else:
        lmax = max(logs)
        raise ConvergenceError(
            f"1F1({a}, {b}; {y}) series did not converge",
            partial=run * math.exp(lmax),
            terms=budget.max_terms,
        )
    lmax = max(logs)
    total = math.fsum(s_ * math.exp(l_ - lmax) for s_, l_ in zip(signs, logs))
    if total == 0:
        return 0.0, -math.inf
    return math.copysign(1.0, total), lmax + math.log(abs(total))


def log_hyp1f1_pos(a: float, b: float, y, budget: AccuracyBudget = DEFAULT_BUDGET):
    """Vectorized ``log 1F1(a; b; y)`` for ``a, b > 0`` and ``y >= 0``.

    Every term is positive, so the sum is accumulated in log space chunk by
    chunk; this avoids overflow of ``1F1`` itself for large ``y`` where the
    caller multiplies by ``exp(-x)`` afterwards.
    """
    y = np.asarray(y, dtype=float)
    shape = y.shape
    y = y.ravel()
    out = np.zeros(y.shape)
    active = y > 0
    if not active.any():
        return out.reshape(shape)
    logy = np.zeros(y.shape)
    logy[active] = np.log(y[active])
    lmax = np.full(y.shape, -np.inf)
    acc = np.zeros(y.shape)
    chunk = 64
    n0 = 0
    carry_a = carry_b = carry_f = 0.0
    log_tol = math.log(budget.rel_tol)
    while active.any():
        if n0 >= budget.max_terms:
            part = lmax + np.log(np.where(acc > 0, acc, 1.0))
            raise ConvergenceError(
                "1F1 log-series did not converge", partial=part.reshape(shape), terms=n0
            )
        n = np.arange(n0, n0 + chunk, dtype=float)
        la = carry_a + np.concatenate(([0.0], np.cumsum(np.log(a + n[:-1]))))
        lb = carry_b + np.concatenate(([0.0], np.cumsum(np.log(b + n[:-1]))))
        lf = carry_f + np.concatenate(([0.0], np.cumsum(np.log(n[1:]))))
        carry_a = la[-1] + math.log(a + n[-1])
        carry_b = lb[-1] + math.log(b + n[-1])
        carry_f = lf[-1] + math.log(n[-1] + 1)
        coef = la - lb - lf
        idx = np.nonzero(active)[0]
        lt = coef[None, :] + n[None, :] * logy[idx, None]
        cmax = lt.max(axis=1)
        new_max = np.maximum(lmax[idx], cmax)
        acc[idx] = acc[idx] * np.exp(lmax[idx] - new_max) + np.exp(lt - new_max[:, None]).sum(axis=1)
        lmax[idx] = new_max
        k = n0 + chunk
        last = k - 1
        rho = y[idx] * max(1.0, (a + last) / (b + last)) / (last + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_tail = lt[:, -1] + np.log(rho) - np.log1p(-rho)
        done = (rho < 1) & (log_tail - (lmax[idx] + np.log(acc[idx])) <= log_tol)
        active[idx[done]] = False
        n0 = k
    pos = y > 0
    out[pos] = lmax[pos] + np.log(acc[pos])
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# Gauss hypergeometric 2F1

_ACCEL_THRESHOLD = 0.9
_ANCHORS = (0.5, 0.25, 0.1, 0.03)
_STEP_FRACTION = 0.5


def hyp2f1(a: float, b: float, c: float, z: float, budget: AccuracyBudget = DEFAULT_BUDGET) -> float:
    """Gauss function ``2F1(a, b; c; z)`` for real ``0 <= z < 1``.

    Above ``z = 0.9`` the Maclaurin series needs thousands of terms. There the
    function is first rewritten with Euler's transformation
    ``(1-z)^(c-a-b) 2F1(c-a, c-b; c; z)`` when that form terminates;
    otherwise it is re-expanded as a Taylor series about successive centres
    between 0.5 and ``z`` (coefficients from the hypergeometric ODE), each
    step covering half the distance to the singularity at 1 so every local
    series converges like ``2^-n``.
    """
    a, b, c, z = float(a), float(b), float(c), float(z)
    if not all(math.isfinite(v) for v in (a, b, c, z)):
        raise DomainError("hyp2f1 requires finite arguments")
    if not (0 <= z < 1):
        raise DomainError(f"hyp2f1 requires 0 <= z < 1, got {z}")
    if _is_nonpos_int(c):
        raise DomainError(f"hyp2f1 undefined for non-positive integer c={c}")
    if z == 0 or a == 0 or b == 0:
        return 1.0
    if _is_nonpos_int(a) or _is_nonpos_int(b):
        return _hyp2f1_direct(a, b, c, z, AccuracyBudget(budget.rel_tol, max(budget.max_terms, 1 + int(-min(a, b)))))
    if z <= _ACCEL_THRESHOLD:
        try:
            return _hyp2f1_direct(a, b, c, z, budget)
        except ConvergenceError:
            # large a*b: the Maclaurin terms peak late even at moderate z
            return _hyp2f1_continued(a, b, c, z, budget)
    ea, eb = c - a, c - b
    if _is_nonpos_int(ea) or _is_nonpos_int(eb) or ea == 0 or eb == 0:
        pref = math.exp((c - a - b) * math.log1p(-z))
        if ea == 0 or eb == 0:
            return pref
        return pref * _hyp2f1_direct(ea, eb, c, z, AccuracyBudget(budget.rel_tol, max(budget.max_terms, 1 + int(-min(ea, eb)))))
    return _hyp2f1_continued(a, b, c, z, budget)


def _hyp2f1_terms(a, b, c, z, n_max):
    t = 1.0
    yield t
    for n in range(n_max - 1):
        t *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        yield t
        if t == 0:
            return


def _hyp2f1_direct(a, b, c, z, budget):
    terms = []
    for n, t in enumerate(_hyp2f1_terms(a, b, c, z, budget.max_terms + 1)):
        terms.append(t)
        if t == 0:
            return math.fsum(terms)
        if n >= 2 and a + n >= 0 and b + n >= 0 and c + n > 0:
            # sup over j >= n of |t_{j+1} / t_j|
            r = z * max(1.0, (a + n) / (c + n)) * max(1.0, (b + n) / (n + 1))
            if r < 1:
                total = math.fsum(terms)
                tail = abs(t) * r / (1 - r)
                if tail <= budget.rel_tol * abs(total) * 0.5:
                    return total
        if len(terms) > budget.max_terms:
            break
    raise ConvergenceError(
        f"2F1({a}, {b}; {c}; {z}) did not converge", partial=math.fsum(terms), terms=len(terms)
    )


def _hyp2f1_continued(a, b, c, z, budget):
    for z0 in _ANCHORS:
        if z0 >= z:
            continue
        try:
            f = _hyp2f1_direct(a, b, c, z0, budget)
            df = a * b / c * _hyp2f1_direct(a + 1, b + 1, c + 1, z0, budget)
            break
        except ConvergenceError as exc:
            err = exc
    else:
        raise err
    while z0 < z:
        h = min(z - z0, _STEP_FRACTION * (1.0 - z0))
        f, df = _taylor_step(a, b, c, z0, f, df, h, budget)
        z0 = z if h == z - z0 else z0 + h
    return f


def _taylor_step(a, b, c, z0, f, df, h, budget):
    """Advance (f, f') from ``z0`` to ``z0 + h`` along the 2F1 ODE."""
    p0 = z0 * (1.0 - z0)
    p1 = 1.0 - 2.0 * z0
    q0 = c - (a + b + 1.0) * z0
    cm, cn = f, df  # Taylor coefficients c_n, c_{n+1}
    vals = [f, df * h]
    ders = [df]
    hn = h
    for n in range(budget.max_terms):
        nxt = -((p1 * (n + 1) * n + q0 * (n + 1)) * cn - (n + a) * (n + b) * cm) / (p0 * (n + 2) * (n + 1))
        cm, cn = cn, nxt
        hn *= h
        vals.append(nxt * hn)
        ders.append((n + 2) * nxt * hn / h)
        if n >= 4:
            total = math.fsum(vals)
            if abs(vals[-1]) + abs(vals[-2]) <= budget.rel_tol * abs(total) * 0.1:
                return total, math.fsum(ders)
    raise ConvergenceError(
        f"2F1({a}, {b}; {c}) re-expansion at z={z0} did not converge", partial=math.fsum(vals), terms=budget.max_terms
    )
