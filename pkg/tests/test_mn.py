import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from halfheat.mn import (
    compute_Mn,
    compute_Mn_alpha,
    f1,
    f1_closed_1d,
    f2,
    f2_closed_1d,
    p_star,
    remark_table,
)
from halfheat.profiles import custom_profile, rho, rho_alpha_profile
from halfheat.quadrature import AT_INFINITY, SupremumError


def _f1_oracle(r):
    rr = rho(r, 1)
    g = lambda y: (rho(y, 1) - rr) ** 2 / (y - r) ** 2 / rho(y, 1) if y != r else 0.0
    val, _ = integrate.quad(g, -r, r, epsabs=1e-13, epsrel=1e-12, limit=200, points=[0.0])
    return val / rr


def _f2_oracle(r):
    rr = rho(r, 1)
    g = lambda y: (rho(y, 1) - rr) ** 2 / (y - r) ** 2 if y != r else 0.0
    right, _ = integrate.quad(g, r, math.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    left, _ = integrate.quad(g, -math.inf, -r, epsabs=1e-13, epsrel=1e-12, limit=200)
    return (right + left) / rr ** 2


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0, 2.0, 7.0])
def test_f1_f2_against_direct_integration(r):
    assert f1(r, 1).value == pytest.approx(_f1_oracle(r), rel=1e-8)
    assert f2(r, 1).value == pytest.approx(_f2_oracle(r), rel=1e-8)


def test_closed_forms_agree_with_direct_integration():
    for r in (0.2, 1.5, 12.0):
        assert float(f1_closed_1d(r)) == pytest.approx(_f1_oracle(r), rel=1e-8)
        assert float(f2_closed_1d(r)) == pytest.approx(_f2_oracle(r), rel=1e-8)


def test_f1_f2_limits():
    assert f1(0.0, 2).value == 0.0
    assert float(f1_closed_1d(1e8)) == pytest.approx(math.pi, rel=1e-6)
    assert float(f2_closed_1d(0.0)) == pytest.approx(math.pi / 2, rel=1e-15)
    assert f2(0.0, 1).value == pytest.approx(math.pi / 2, rel=1e-9)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("r", [0.3, 1.0, 4.0])
def test_kernel_and_pair_reductions_agree(n, r):
    for fn in (f1, f2):
        a = fn(r, n, method="kernel").value
        b = fn(r, n, method="pair").value
        assert a == pytest.approx(b, rel=1e-9)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        f1(-1.0, 1)
    with pytest.raises(ValueError):
        f1(1.0, 1, method="taylor")
    with pytest.raises(ValueError):
        f2(1.0, 6)
    with pytest.raises(ValueError):
        p_star(1, -0.1)


def test_M1_and_p_star_1():
    rep = compute_Mn(1)
    assert rep.Mn == pytest.approx(4.8271, abs=5e-3)
    assert rep.p_star == pytest.approx(4.2072, abs=1e-3)
    assert rep.sup_f1 == pytest.approx(math.pi, rel=1e-9)
    assert rep.argsup_f1 == AT_INFINITY
    assert rep.as_dict()["argsup_f1"] == "inf"
    assert rep.Mn <= 2 + 2 * math.pi and rep.Mn < 4 * math.pi


def test_remark_table():
    rows = remark_table()
    expected = {2: 2.1498, 3: 2.8406, 4: 3.5561, 5: 4.2839}
    for rep in rows:
        assert rep.cnMn == pytest.approx(expected[rep.n], abs=1e-2)
    assert rows[-1].p_star is None and not rows[-1].admissible
    assert all(r.p_star is not None and r.p_star > 1 for r in rows[:-1])


def test_p_star_formula():
    assert p_star(2, 0.0) == pytest.approx(3.0)
    assert p_star(1, 2.0) == pytest.approx(1.5 / 0.5)
    assert p_star(3, 4.0) is None


def test_fractional_one_half_reproduces_M1():
    rep = compute_Mn_alpha(1, 0.5)
    assert rep.Mn == pytest.approx(compute_Mn(1).Mn, abs=1e-3)
    assert rep.admissible


@settings(max_examples=4)
@given(st.floats(0.01, 100.0))
def test_M_is_invariant_under_profile_scaling(c):
    # a plain callable profile without a log-ratio helper
    prof = custom_profile(1, lambda r: c / (1.0 + r * r), lambda r: -2 * c * r / (1.0 + r * r) ** 2,
                          tail=(c, 2.0), mass=c * math.pi)
    assert compute_Mn(1, profile=prof).Mn == pytest.approx(compute_Mn(1).Mn, rel=1e-7)


def test_gaussian_profile_has_infinite_M():
    with pytest.raises(SupremumError):
        compute_Mn_alpha(1, 1.0)


def test_profile_dimension_mismatch():
    with pytest.raises(ValueError):
        compute_Mn_alpha(2, 0.5, profile=rho_alpha_profile(1, 0.5))
