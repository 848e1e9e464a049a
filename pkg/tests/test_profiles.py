import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from halfheat.kernel import heat_kernel
from halfheat.profiles import (
    check_alpha,
    check_dimension,
    custom_profile,
    half_heat_constant,
    norm_constant,
    q_n,
    rho,
    rho_alpha_profile,
    rho_profile,
    y_dot_grad_rho,
    y_dot_grad_y_dot_grad_rho,
)
from halfheat.quadrature import sphere_area


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_q_n_is_the_mass_of_rho(n):
    ref, _ = integrate.quad(lambda r: sphere_area(n) * r ** (n - 1) * (1 + r * r) ** (-(n + 1) / 2), 0, math.inf,
                            epsabs=1e-13, epsrel=1e-12)
    assert q_n(n) == pytest.approx(ref, rel=1e-9)
    assert half_heat_constant(n) * q_n(n) == pytest.approx(1.0, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_norm_constant_at_one_half_is_the_half_heat_constant(n):
    assert norm_constant(n, 0.5) == pytest.approx(half_heat_constant(n), rel=1e-13)


def test_norm_constant_closed_form_one_dimension():
    # c_{1, a} = 4^a Gamma((1 + 2a)/2) / (sqrt(pi) |Gamma(-a)|)
    for a in (0.2, 0.5, 0.9):
        ref = 4 ** a * special.gamma(0.5 + a) / (math.sqrt(math.pi) * abs(special.gamma(-a)))
        assert norm_constant(1, a) == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_heat_kernel_unit_mass_and_profile(n):
    t = 0.7
    mass, _ = integrate.quad(lambda r: sphere_area(n) * r ** (n - 1) * float(heat_kernel(np.array([r] + [0.0] * (n - 1)) if n > 1 else r, t, n)),
                             0, math.inf, epsabs=1e-12, epsrel=1e-11)
    assert mass == pytest.approx(1.0, rel=1e-9)
    assert float(heat_kernel(np.array([0.0] * n) if n > 1 else 0.0, 1.0, n)) == pytest.approx(half_heat_constant(n))


def test_heat_kernel_rejects_nonpositive_time():
    with pytest.raises(ValueError):
        heat_kernel(0.0, 0.0, 1)


@given(st.floats(0.0, 50.0), st.integers(1, 5))
def test_radial_derivative_formulas(r, n):
    h = 1e-6 * (1 + r)
    fd = (rho(r + h, n) - rho(max(r - h, 0.0), n)) / (r + h - max(r - h, 0.0))
    assert y_dot_grad_rho(r, n) == pytest.approx(r * fd, rel=1e-5, abs=1e-12)
    fd2 = (y_dot_grad_rho(r + h, n) - y_dot_grad_rho(max(r - h, 0.0), n)) / (r + h - max(r - h, 0.0))
    assert y_dot_grad_y_dot_grad_rho(r, n) == pytest.approx(r * fd2, rel=1e-5, abs=1e-12)


@given(st.floats(0.0, 1e4), st.floats(-1.0, 1.0))
def test_rho_log_ratio_is_stable(r0, frac):
    prof = rho_profile(2)
    r1 = max(r0 * (1 + 1e-9 * frac), 0.0)
    got = float(prof.log_ratio(np.array(r1), r0))
    mp.mp.dps = 50
    ref = float(-1.5 * (mp.log1p(mp.mpf(r1) ** 2) - mp.log1p(mp.mpf(r0) ** 2)))
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-20)


def test_dimension_and_alpha_validation():
    for bad in (0, 6, 2.5):
        with pytest.raises(ValueError):
            check_dimension(bad)
    with pytest.raises(ValueError):
        check_alpha(1.0)
    assert check_alpha(1.0, allow_one=True) == 1.0
    with pytest.raises(ValueError):
        check_alpha(0.0)


def test_rho_alpha_at_one_half_is_the_normalised_rho():
    prof = rho_alpha_profile(1, 0.5)
    r = np.linspace(0, 20, 41)
    np.testing.assert_allclose(prof(r), half_heat_constant(1) * rho(r, 1), rtol=1e-7)
    assert prof.mass == pytest.approx(1.0, abs=1e-8)


def test_rho_alpha_at_one_is_the_gaussian():
    prof = rho_alpha_profile(2, 1.0)
    r = np.linspace(0, 5, 11)
    np.testing.assert_allclose(prof(r), np.exp(-r * r / 4) / (4 * math.pi), rtol=1e-13)
    assert prof.tail is None


@pytest.mark.parametrize("alpha", [0.3, 0.8])
def test_rho_alpha_tail_and_mass(alpha):
    prof = rho_alpha_profile(1, alpha)
    A, s = prof.tail
    assert s == pytest.approx(1 + 2 * alpha)
    assert A == pytest.approx(norm_constant(1, alpha), rel=1e-10)
    assert prof.mass == pytest.approx(1.0, abs=1e-6)
    # the Fourier transform at 0 is the mass; check the tabulation against a direct integral
    ref, _ = integrate.quad(lambda k: math.cos(k * 2.0) * math.exp(-k ** (2 * alpha)) / math.pi, 0, math.inf,
                            limit=400, epsabs=1e-12)
    assert float(prof(np.array(2.0))) == pytest.approx(ref, rel=1e-6)


@given(st.floats(0.1, 100.0))
def test_scaled_profile_keeps_log_ratios(c):
    base = custom_profile(1, lambda r: 1.0 / (1.0 + r * r))
    scaled = base.scaled(c)
    r = np.array([0.0, 0.5, 3.0, 40.0])
    np.testing.assert_allclose(scaled(r), c * base(r), rtol=1e-15)
    np.testing.assert_allclose(scaled.log_ratio(r, 2.0), base.log_ratio(r, 2.0), rtol=1e-12, atol=1e-12)
