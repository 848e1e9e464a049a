"""The constant M_n, the exponent p_*(n) and the fractional analogue M_{n,alpha}.

f_1(r) = (1/rho(y)) int_{|y'|<r} (rho(y') - rho(y))^2 / |y'-y|^{n+2a} / rho(y') dy'
f_2(r) = (1/rho(y)^2) int_{|y'|>r} (rho(y') - rho(y))^2 / |y'-y|^{n+2a} dy'

With u = rho(y')/rho(y) both integrands are (u - 1)^2 (divided by u for f_1)
times the kernel, so the functions only see log ratios of the profile and are
unchanged when the profile is multiplied by a constant.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .profiles import (
    RadialProfile,
    check_alpha,
    check_dimension,
    half_heat_constant,
    norm_constant,
    rho_alpha_profile,
    rho_profile,
)
from .quadrature import (
    DEFAULT_SPEC,
    IntegralResult,
    QuadSpec,
    QuadratureError,
    SupremumError,
    radial_kernel_integral,
    radial_pair_integral,
    sup_search_radial,
)

__all__ = [
    "MnReport",
    "compute_Mn",
    "compute_Mn_alpha",
    "f1",
    "f1_closed_1d",
    "f2",
    "f2_closed_1d",
    "p_star",
    "remark_table",
]


def _profile(n: int, profile: Optional[RadialProfile]) -> RadialProfile:
    if profile is None:
        return rho_profile(n)
    if profile.dim != n:
        raise ValueError(f"profile lives in dimension {profile.dim}, not {n}")
    return profile


def _quotients(profile: RadialProfile, r: float, inverse: bool):
    """q(r') = (u - 1)^2 / (r' - r)^2 [/ u], u = profile(r') / profile(r)."""
    if profile.derivative is not None and r > 0:
        slope = float(profile.derivative(np.array(r)) / profile(np.array(r)))
    else:
        slope = 0.0

    def q(rp):
        ell = profile.log_ratio(rp, r)
        gap = rp - r
        with np.errstate(invalid="ignore", divide="ignore"):
            dq = np.where(gap != 0, np.expm1(ell) / np.where(gap != 0, gap, 1.0), slope)
        out = dq * dq
        if inverse:
            out = out * np.exp(-ell)
        return out

    return q


def _pair_integrand(profile: RadialProfile, r: float, n: int, alpha: float, inverse: bool):
    def g(rp, _c, s):
        ell = profile.log_ratio(rp, r)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(s > 0, np.expm1(ell) ** 2 / np.where(s > 0, s, 1.0) ** (n + 2 * alpha), 0.0)
        if inverse:
            out = out * np.exp(-ell)
        return out

    return g


def _check_r(r) -> float:
    r = float(r)
    if not (r >= 0 and math.isfinite(r)):
        raise ValueError(f"radius must be finite and non-negative, got {r}")
    return r


def f1(r: float, n: int, spec: QuadSpec = DEFAULT_SPEC, *, profile: Optional[RadialProfile] = None,
       alpha: float = 0.5, method: str = "kernel") -> IntegralResult:
    """f_1 at |y| = r.

    ``method="kernel"`` integrates in |y'| against the closed-form angular
    kernel; ``method="pair"`` integrates in polar coordinates around y. The
    two are independent reductions of the same integral.
    """
    n = check_dimension(n)
    r = _check_r(r)
    prof = _profile(n, profile)
    if r == 0.0:
        return IntegralResult(0.0, 0.0, 0, True)
    if method == "kernel":
        return radial_kernel_integral(_quotients(prof, r, True), n, "inside_r", r, spec, alpha)
    if method == "pair":
        return radial_pair_integral(_pair_integrand(prof, r, n, alpha, True), n, "inside_r", r, spec)
    raise ValueError(f"unknown method {method!r}")


def f2(r: float, n: int, spec: QuadSpec = DEFAULT_SPEC, *, profile: Optional[RadialProfile] = None,
       alpha: float = 0.5, method: str = "kernel") -> IntegralResult:
    """f_2 at |y| = r; see :func:`f1` for ``method``."""
    n = check_dimension(n)
    r = _check_r(r)
    prof = _profile(n, profile)
    if method == "kernel":
        return radial_kernel_integral(_quotients(prof, r, False), n, "outside_r", r, spec, alpha)
    if method == "pair":
        return radial_pair_integral(_pair_integrand(prof, r, n, alpha, False), n, "outside_r", r, spec)
    raise ValueError(f"unknown method {method!r}")


def f1_closed_1d(r):
    """Closed form of f_1 for n = 1."""
    r = np.abs(np.asarray(r, dtype=float))
    return 2.0 * r / (1.0 + r * r) + 2.0 * (r * r - 1.0) / (1.0 + r * r) * np.arctan(r)


def f2_closed_1d(r):
    """Closed form of f_2 for n = 1."""
    r = np.abs(np.asarray(r, dtype=float))
    return math.pi - 2.0 * np.arctan(r) + (r * r - 1.0) * (0.5 * math.pi - np.arctan(r) - r / (1.0 + r * r))


def p_star(n: int, cnMn: float) -> Optional[float]:
    """(n + 1 - cnMn/4) / (n - 1 + cnMn/4), or None when cnMn >= 4."""
    n = check_dimension(n)
    cnMn = float(cnMn)
    if not cnMn >= 0:
        raise ValueError(f"cnMn must be non-negative, got {cnMn}")
    if cnMn >= 4.0:
        return None
    return (n + 1 - cnMn / 4.0) / (n - 1 + cnMn / 4.0)


@dataclass(frozen=True)
class MnReport:
    n: int
    alpha: float
    sup_f1: float
    sup_f2: float
    argsup_f1: float
    argsup_f2: float
    Mn: float
    cn: float
    cnMn: float
    p_star: Optional[float]
    admissible: bool
    err_est: float

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("argsup_f1", "argsup_f2"):
            if math.isinf(d[k]):
                d[k] = "inf"
        return d


def _sup_pair(n: int, alpha: float, prof: RadialProfile, spec: QuadSpec):
    def g1(r):
        return f1(r, n, spec, profile=prof, alpha=alpha).require("f1")

    def g2(r):
        return f2(r, n, spec, profile=prof, alpha=alpha).require("f2")

    if prof.tail is not None and prof.mass is not None and abs(prof.tail[1] - (n + 2 * alpha)) < 1e-12:
        lim1 = prof.mass / prof.tail[0]
        lim2 = 0.0
    elif prof.tail is None and prof.kind == "rho_alpha":
        # faster than any power: the f_1 ratio is unbounded
        raise SupremumError(
            "f1 grows without bound for a profile with super-polynomial decay; the supremum is infinite"
        )
    else:
        lim1 = lim2 = None
    s1 = sup_search_radial(g1, spec, limit=lim1)
    s2 = sup_search_radial(g2, spec, limit=lim2)
    return s1, s2


def compute_Mn(n: int, spec: QuadSpec = DEFAULT_SPEC, profile: Optional[RadialProfile] = None) -> MnReport:
    """M_n = sup f_1 + sup f_2, each supremum taken over r in [0, inf]."""
    n = check_dimension(n)
    prof = _profile(n, profile)
    s1, s2 = _sup_pair(n, 0.5, prof, spec)
    cn = half_heat_constant(n)
    Mn = s1.sup_value + s2.sup_value
    cnMn = cn * Mn
    ps = p_star(n, cnMn)
    return MnReport(n=n, alpha=0.5, sup_f1=s1.sup_value, sup_f2=s2.sup_value, argsup_f1=s1.argsup,
                    argsup_f2=s2.argsup, Mn=Mn, cn=cn, cnMn=cnMn, p_star=ps, admissible=cnMn < 4.0,
                    err_est=s1.err_est + s2.err_est)


def compute_Mn_alpha(n: int, alpha: float, spec: QuadSpec = DEFAULT_SPEC,
                     profile: Optional[RadialProfile] = None) -> MnReport:
    """M_{n,alpha} with the fractional profile rho_alpha and kernel exponent n + 2 alpha.

    ``admissible`` reports c_{n,alpha} M_{n,alpha} < 8 alpha. ``p_star`` is
    only defined for alpha = 1/2 and is left empty otherwise.
    """
    n = check_dimension(n)
    alpha = check_alpha(alpha, allow_one=True)
    prof = profile if profile is not None else rho_alpha_profile(n, alpha, spec=spec)
    if prof.dim != n:
        raise ValueError(f"profile lives in dimension {prof.dim}, not {n}")
    try:
        s1, s2 = _sup_pair(n, alpha, prof, spec)
    except QuadratureError as exc:
        raise QuadratureError(
            f"M_{{n,alpha}} quadrature failed ({exc}); tabulate rho_alpha on a finer radial grid", exc.result
        ) from exc
    cn = norm_constant(n, alpha)
    Mn = s1.sup_value + s2.sup_value
    cnMn = cn * Mn
    return MnReport(n=n, alpha=alpha, sup_f1=s1.sup_value, sup_f2=s2.sup_value, argsup_f1=s1.argsup,
                    argsup_f2=s2.argsup, Mn=Mn, cn=cn, cnMn=cnMn,
                    p_star=p_star(n, cnMn) if alpha == 0.5 else None,
                    admissible=cnMn < 8.0 * alpha, err_est=s1.err_est + s2.err_est)


def remark_table(spec: QuadSpec = DEFAULT_SPEC, dims=(2, 3, 4, 5)) -> list[MnReport]:
    """c_n M_n and p_*(n) for each dimension; p_* is None where c_n M_n >= 4."""
    return [compute_Mn(n, spec) for n in dims]
