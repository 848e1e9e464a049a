import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from halfheat.quadrature import (
    AT_INFINITY,
    IntegralResult,
    QuadSpec,
    QuadratureError,
    adaptive_1d,
    angular_kernel,
    radial_pair_integral,
    sphere_area,
    sup_search_radial,
)


@pytest.mark.parametrize(
    "f, a, b",
    [
        (np.sin, 0.0, math.pi),
        (lambda x: np.exp(-x * x), -math.inf, math.inf),
        (lambda x: 1.0 / (1.0 + x * x) ** 1.5, 0.0, math.inf),
        (lambda x: np.log(x), 0.0, 1.0),
        (lambda x: np.abs(x - 0.3), 0.0, 1.0),
    ],
)
def test_adaptive_matches_scipy(f, a, b):
    ref, _ = integrate.quad(lambda x: float(f(np.array(x))), a, b, epsabs=1e-13, epsrel=1e-12, limit=200)
    res = adaptive_1d(f, a, b, points=(0.3,) if 0 < 0.3 < b and a == 0 else ())
    assert res.converged
    assert abs(res.value - ref) < 1e-9 * max(1.0, abs(ref))
    assert res.err_est < 1e-6


def test_reversed_and_empty_intervals():
    assert adaptive_1d(np.cos, 1.0, 1.0).value == 0.0
    fwd = adaptive_1d(np.cos, 0.0, 1.0).value
    assert adaptive_1d(np.cos, 1.0, 0.0).value == pytest.approx(-fwd, rel=1e-14)


@given(st.floats(0.05, 0.95))
def test_interval_additivity(c):
    f = lambda x: np.exp(x) * np.cos(3 * x)
    whole = adaptive_1d(f, 0.0, 1.0).value
    parts = adaptive_1d(f, 0.0, c).value + adaptive_1d(f, c, 1.0).value
    assert whole == pytest.approx(parts, rel=1e-10, abs=1e-12)


def test_subdivision_budget_reported():
    spec = QuadSpec(rel_tol=1e-14, abs_tol=1e-300, max_subdivisions=3)
    res = adaptive_1d(lambda x: np.sin(1.0 / x), 1e-3, 1.0, spec)
    assert not res.converged
    with pytest.raises(QuadratureError):
        res.require()


def test_quadspec_validation():
    with pytest.raises(ValueError):
        QuadSpec(rel_tol=0.0)
    with pytest.raises(ValueError):
        QuadSpec(order=21)
    assert QuadSpec().tightened(10).rel_tol == pytest.approx(1e-9)


def test_integral_result_algebra():
    a = IntegralResult(1.0, 1e-3, 10, True)
    b = IntegralResult(2.0, 2e-3, 5, False)
    s = a + b
    assert (s.value, s.err_est, s.evaluations, s.converged) == (3.0, pytest.approx(3e-3), 15, False)
    assert a.scaled(-2.0).err_est == pytest.approx(2e-3)
    with pytest.raises(ValueError):
        IntegralResult(0.0, -1.0, 0, True)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_sphere_area(n):
    expected = {1: 2.0, 2: 2 * math.pi, 3: 4 * math.pi, 4: 2 * math.pi ** 2, 5: 8 * math.pi ** 2 / 3}[n]
    assert sphere_area(n) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.8])
@pytest.mark.parametrize("r, rp", [(1.0, 0.4), (0.7, 2.5), (3.0, 3.2)])
def test_angular_kernel_n3_against_direct_angle_integral(r, rp, alpha):
    # n = 3: 2 pi int_0^pi sin(t) (r^2 + rp^2 - 2 r rp cos t)^{-(3 + 2a)/2} dt
    e = (3 + 2 * alpha) / 2
    ref, _ = integrate.quad(lambda t: 2 * math.pi * math.sin(t) * (r * r + rp * rp - 2 * r * rp * math.cos(t)) ** -e,
                            0, math.pi, epsabs=1e-14, epsrel=1e-12)
    got = float(angular_kernel(3, r, rp, alpha)) / (r - rp) ** 2
    assert got == pytest.approx(ref, rel=1e-10)


def test_angular_kernel_n2_against_direct_angle_integral():
    r, rp = 1.3, 0.6
    ref, _ = integrate.quad(lambda t: (r * r + rp * rp - 2 * r * rp * math.cos(t)) ** -1.5, 0, 2 * math.pi,
                            epsabs=1e-14, epsrel=1e-12)
    assert float(angular_kernel(2, r, rp)) / (r - rp) ** 2 == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_pair_integral_ball_volume(n):
    r = 1.7
    vol = sphere_area(n) * r ** n / n
    res = radial_pair_integral(lambda rp, c, s: np.ones_like(rp), n, "inside_r", r)
    assert res.value == pytest.approx(vol, rel=1e-9)


def test_sup_search_interior_maximum():
    res = sup_search_radial(lambda r: 2 * r / (1 + r * r))
    assert res.sup_value == pytest.approx(1.0, abs=1e-12)
    assert res.argsup == pytest.approx(1.0, abs=1e-4)
    assert res.attained


def test_sup_search_at_origin_and_at_infinity():
    res = sup_search_radial(lambda r: math.pi - 2 * math.atan(r))
    assert res.sup_value == pytest.approx(math.pi, abs=1e-12)
    assert res.argsup == pytest.approx(0.0, abs=1e-6)
    inf = sup_search_radial(lambda r: 2 * math.atan(r), limit=math.pi)
    assert inf.sup_value == pytest.approx(math.pi)
    assert inf.argsup == AT_INFINITY and not inf.attained
