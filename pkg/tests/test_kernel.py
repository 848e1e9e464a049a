import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from halfheat.kernel import (
    GridField,
    eta_bound_ratio,
    half_laplacian_pv,
    half_laplacian_spectral,
    kernel_identity_residuals,
    periodization_bound,
)
from halfheat.profiles import custom_profile, rho, rho_profile, y_dot_grad_rho
from halfheat.quadrature import QuadratureError


def _pv_oracle_1d(f, x):
    # c_1 PV int (f(x) - f(y)) / (x - y)^2 dy, symmetrised so that the
    # integrand is regular: (2 f(x) - f(x + s) - f(x - s)) / s^2 on s > 0
    g = lambda s: (2 * f(x) - f(x + s) - f(x - s)) / (s * s) if s > 0 else 0.0
    head, _ = integrate.quad(g, 0, 1, epsabs=1e-13, epsrel=1e-12, limit=200)
    tail, _ = integrate.quad(g, 1, math.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return (head + tail) / math.pi


@pytest.mark.parametrize("x", [0.0, 0.4, 1.0, 3.0, 25.0])
def test_pv_of_rho_one_dimension_against_scipy(x):
    f = lambda y: 1.0 / (1.0 + y * y)
    ref = _pv_oracle_1d(f, x)
    assert half_laplacian_pv(rho_profile(1), x).value == pytest.approx(ref, rel=1e-8, abs=1e-12)
    assert ref == pytest.approx(float(rho(x, 1) + y_dot_grad_rho(x, 1)), rel=1e-8, abs=1e-12)


def test_pv_accepts_callables():
    f = lambda y: np.exp(-np.asarray(y) ** 2)
    x = 0.7
    ref = _pv_oracle_1d(lambda y: math.exp(-y * y), x)
    assert half_laplacian_pv(f, np.array([x]), n=1).value == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_kernel_identities(n):
    for x in (0.0, 0.3, 1.0, 2.5, 9.0):
        res = kernel_identity_residuals(x, n)
        assert res.max_residual() < 1e-8, (x, res)


def test_kernel_identities_accept_points():
    res = kernel_identity_residuals(np.array([0.6, -0.8]), 2)
    assert res.max_residual() < 1e-8
    with pytest.raises(ValueError):
        kernel_identity_residuals(np.array([1.0, 2.0, 3.0]), 2)


def test_spectral_operator_on_single_modes():
    g = GridField.from_function(lambda x: np.cos(3 * math.pi * x / 8) + 2 * np.sin(math.pi * x / 8), 1, 8.0, 64)
    out = half_laplacian_spectral(g).values
    x = g.axis()
    expected = 3 * math.pi / 8 * np.cos(3 * math.pi * x / 8) + 2 * math.pi / 8 * np.sin(math.pi * x / 8)
    np.testing.assert_allclose(out, expected, atol=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2 ** 16))
def test_spectral_operator_is_linear(a, b, seed):
    rng = np.random.default_rng(seed)
    f = GridField(1, 4.0, 64, rng.standard_normal(64))
    g = GridField(1, 4.0, 64, rng.standard_normal(64))
    lhs = half_laplacian_spectral(f.with_values(a * f.values + b * g.values)).values
    rhs = a * half_laplacian_spectral(f).values + b * half_laplacian_spectral(g).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-11 * (1 + abs(a) + abs(b)))


def test_spectral_operator_two_dimensions():
    L, N = 4.0, 32
    g = GridField.from_function(lambda x, y: np.cos(math.pi * x / 4) * np.cos(math.pi * y / 2), 2, L, N)
    out = half_laplacian_spectral(g).values
    np.testing.assert_allclose(out, math.hypot(math.pi / 4, math.pi / 2) * g.values, atol=1e-12)


def test_grid_field_validation():
    with pytest.raises(ValueError):
        GridField(1, 4.0, 100, np.zeros(100))
    with pytest.raises(ValueError):
        GridField(1, 4.0, 64, np.zeros(32))


def test_spectral_and_pv_agree_within_periodization_bound():
    L, N = 32.0, 1024
    g = GridField.from_function(lambda x: rho(x, 1), 1, L, N)
    spec_vals = half_laplacian_spectral(g).values
    bound = periodization_bound(lambda y: rho(y, 1), lambda y: rho(y, 1) + y_dot_grad_rho(y, 1), g)
    x = g.axis()
    for i in np.where(np.abs(x) <= 0.75 * L)[0][::53]:
        pv = half_laplacian_pv(rho_profile(1), abs(x[i]))
        assert abs(spec_vals[i] - pv.value) <= max(1e-6, bound[i] + pv.err_est)


def test_eta_ratio_finite_and_decaying():
    eb = eta_bound_ratio(0.5, 1, [0.5, 2.0, 10.0, 100.0])
    assert np.all(np.isfinite(eb.ratios))
    assert eb.ratios[-1] < eb.ratios[1]
    with pytest.raises(ValueError):
        eta_bound_ratio(0.5, 1, [0.0, 1.0])
    with pytest.raises(ValueError):
        eta_bound_ratio(1.5, 1, [1.0])


def test_pv_reports_nonconvergence():
    from halfheat.quadrature import QuadSpec

    spec = QuadSpec(rel_tol=1e-15, abs_tol=1e-300, max_subdivisions=2)
    with pytest.raises(QuadratureError):
        half_laplacian_pv(custom_profile(1, lambda r: np.cos(5 * r) / (1 + r * r), lambda r: 0 * r), 0.3, spec)
