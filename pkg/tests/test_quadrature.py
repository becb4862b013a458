from __future__ import annotations

import math

import numpy as np
import pytest

from akms_secrecy.errors import NumericError
from akms_secrecy.quadrature import (
    GAUSS_WEIGHTS,
    KRONROD_WEIGHTS,
    NODES,
    integrate,
    integrate_semi_infinite,
)


def test_rule_exactness():
    # Kronrod part is exact through degree 31, Gauss part through 19
    for k in range(0, 32):
        exact = 0.0 if k % 2 else 2.0 / (k + 1)
        assert KRONROD_WEIGHTS @ NODES**k == pytest.approx(exact, abs=1e-14)
        if k < 20:
            assert GAUSS_WEIGHTS @ NODES**k == pytest.approx(exact, abs=1e-14)


def test_smooth_integral():
    r = integrate(np.cos, 0.0, 10.0)
    assert r.value == pytest.approx(math.sin(10.0), abs=1e-13)
    assert r.error < 1e-10


def test_breakpoint_on_kink():
    r = integrate(lambda x: np.abs(x - 0.3), 0.0, 1.0, points=[0.3])
    assert r.value == pytest.approx(0.5 * (0.3**2 + 0.7**2), abs=1e-14)


def test_endpoint_singularity_via_power_map():
    # int_0^inf x^(-1/2) e^-x dx = sqrt(pi)
    r = integrate_semi_infinite(lambda x: x**-0.5 * np.exp(-x), power=2.0)
    assert r.value == pytest.approx(math.sqrt(math.pi), rel=1e-12)


def test_semi_infinite_heavy_tail():
    r = integrate_semi_infinite(lambda x: 1.0 / (1.0 + x) ** 2, epsrel=1e-12)
    assert r.value == pytest.approx(1.0, rel=1e-11)


def test_failure_carries_partial():
    with pytest.raises(NumericError) as info:
        integrate(lambda x: np.sin(1.0 / x), 1e-8, 1.0, epsabs=1e-15, epsrel=1e-15, max_intervals=50)
    assert info.value.partial is not None
    assert info.value.partial.intervals <= 50


def test_non_finite_integrand_raises():
    with pytest.raises(NumericError):
        integrate(lambda x: np.full_like(x, np.nan), 0.0, 1.0)
