"""Radial profiles on R^n: the half-heat profile rho, its relatives, and
the fractional-heat profile rho_alpha obtained by radial Fourier inversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import jv, rgamma

from .quadrature import DEFAULT_SPEC, QuadSpec, QuadratureError, adaptive_1d, sphere_area

__all__ = [
    "MAX_DIM",
    "RadialProfile",
    "check_alpha",
    "check_dimension",
    "constant_profile",
    "custom_profile",
    "eta_profile",
    "fourier_radial_inverse",
    "half_heat_constant",
    "norm_constant",
    "q_n",
    "rho",
    "rho_alpha_profile",
    "rho_profile",
    "stable_tail_coefficients",
    "y_dot_grad_rho",
    "y_dot_grad_rho_profile",
    "y_dot_grad_y_dot_grad_rho",
]

MAX_DIM = 5


def check_dimension(n) -> int:
    if isinstance(n, bool) or int(n) != n or not 1 <= int(n) <= MAX_DIM:
        raise ValueError(f"dimension must be an integer in [1, {MAX_DIM}], got {n!r}")
    return int(n)


def check_alpha(alpha, allow_one: bool = False) -> float:
    alpha = float(alpha)
    upper_ok = alpha <= 1.0 if allow_one else alpha < 1.0
    if not (alpha > 0.0 and upper_ok):
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise ValueError(f"fractional order must lie in {bound}, got {alpha}")
    return alpha


def norm_constant(n: int, alpha: float = 0.5) -> float:
    """c_{n,alpha} = 4^alpha Gamma((n + 2 alpha)/2) / (pi^{n/2} |Gamma(-alpha)|)."""
    n = check_dimension(n)
    alpha = check_alpha(alpha, allow_one=True)
    return 4.0**alpha * math.gamma((n + 2 * alpha) / 2) * abs(float(rgamma(-alpha))) / math.pi ** (n / 2)


def half_heat_constant(n: int) -> float:
    """b_n = Gamma((n+1)/2) / pi^{(n+1)/2}; equal to c_{n,1/2}."""
    n = check_dimension(n)
    return math.gamma((n + 1) / 2) / math.pi ** ((n + 1) / 2)


def q_n(n: int) -> float:
    """Integral of rho over R^n, pi^{(n+1)/2} / Gamma((n+1)/2)."""
    n = check_dimension(n)
    return math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


def rho(r, n: int):
    """rho(y) = (1 + |y|^2)^{-(n+1)/2} as a function of r = |y|."""
    r = np.asarray(r, dtype=float)
    return (1.0 + r * r) ** (-(n + 1) / 2.0)


def y_dot_grad_rho(r, n: int):
    """y . grad rho = -(n+1) |y|^2 rho / (1 + |y|^2)."""
    r = np.asarray(r, dtype=float)
    r2 = r * r
    return -(n + 1) * r2 * (1.0 + r2) ** (-(n + 3) / 2.0)


def y_dot_grad_y_dot_grad_rho(r, n: int):
    """y . grad (y . grad rho), closed form."""
    r = np.asarray(r, dtype=float)
    r2 = r * r
    m = (n + 1) / 2.0
    return -(n + 1) * (2.0 * r2 * (1.0 + r2) ** (-m - 1) - (2.0 * m + 2.0) * r2 * r2 * (1.0 + r2) ** (-m - 2))


@dataclass(frozen=True)
class RadialProfile:
    """A radial function ``r -> f(r)`` on R^dim.

    ``derivative`` is df/dr when known. ``log_ratio(r1, r0)`` returns
    ``log f(r1) - log f(r0)`` for positive profiles, accurately when r1 is
    close to r0. ``tail`` is ``(A, s)`` when ``f(r) ~ A r^{-s}`` and
    ``mass`` is the integral over R^dim, if finite and known.
    """

    dim: int
    kind: str
    fn: Callable[[np.ndarray], np.ndarray]
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    log_ratio_fn: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    params: dict = field(default_factory=dict)
    tail: Optional[tuple[float, float]] = None
    mass: Optional[float] = None
    radii: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None

    def __call__(self, r):
        return self.fn(np.asarray(r, dtype=float))

    def y_dot_grad(self, r):
        if self.derivative is None:
            raise ValueError(f"profile {self.kind!r} has no derivative")
        r = np.asarray(r, dtype=float)
        return r * self.derivative(r)

    def log_ratio(self, r1, r0: float):
        if self.log_ratio_fn is not None:
            return self.log_ratio_fn(np.asarray(r1, dtype=float), float(r0))
        return np.log(self(r1)) - math.log(float(self(r0)))

    def scaled(self, c: float) -> "RadialProfile":
        """``c * f``; log ratios are unchanged."""
        fn, d = self.fn, self.derivative
        return RadialProfile(
            dim=self.dim,
            kind=self.kind,
            fn=lambda r: c * fn(r),
            derivative=None if d is None else (lambda r: c * d(r)),
            log_ratio_fn=self.log_ratio_fn,
            params={**self.params, "scale": c * self.params.get("scale", 1.0)},
            tail=None if self.tail is None else (c * self.tail[0], self.tail[1]),
            mass=None if self.mass is None else c * self.mass,
            radii=self.radii,
            values=None if self.values is None else c * self.values,
        )


def rho_profile(n: int) -> RadialProfile:
    n = check_dimension(n)
    m = (n + 1) / 2.0

    def log_ratio(r1, r0):
        return -m * np.log1p((r1 - r0) * (r1 + r0) / (1.0 + r0 * r0))

    return RadialProfile(
        dim=n,
        kind="rho",
        fn=lambda r: rho(r, n),
        derivative=lambda r: -(n + 1) * r * (1.0 + r * r) ** (-m - 1),
        log_ratio_fn=log_ratio,
        tail=(1.0, n + 1.0),
        mass=q_n(n),
    )


def y_dot_grad_rho_profile(n: int) -> RadialProfile:
    n = check_dimension(n)
    m = (n + 1) / 2.0

    def deriv(r):
        # d/dr [-(n+1) r^2 (1+r^2)^{-m-1}]
        r2 = r * r
        return -(n + 1) * (2 * r * (1 + r2) ** (-m - 1) - (2 * m + 2) * r * r2 * (1 + r2) ** (-m - 2))

    return RadialProfile(dim=n, kind="y_dot_grad_rho", fn=lambda r: y_dot_grad_rho(r, n), derivative=deriv,
                         mass=-n * q_n(n))


def eta_profile(n: int, delta: float) -> RadialProfile:
    """eta(x) = (1 + |x|)^{-delta}, 0 < delta < 1."""
    n = check_dimension(n)
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return RadialProfile(
        dim=n,
        kind="eta",
        fn=lambda r: (1.0 + r) ** (-delta),
        derivative=lambda r: -delta * (1.0 + r) ** (-delta - 1.0),
        log_ratio_fn=lambda r1, r0: -delta * np.log1p((r1 - r0) / (1.0 + r0)),
        params={"delta": delta},
        tail=(1.0, delta),
    )


def constant_profile(n: int, c: float) -> RadialProfile:
    n = check_dimension(n)
    c = float(c)
    return RadialProfile(dim=n, kind="constant", fn=lambda r: np.full(np.shape(r), c),
                         derivative=lambda r: np.zeros(np.shape(r)), params={"c": c})


def custom_profile(n: int, fn, derivative=None, kind: str = "custom", tail=None, mass=None) -> RadialProfile:
    return RadialProfile(dim=check_dimension(n), kind=kind, fn=fn, derivative=derivative, tail=tail, mass=mass)


# ---------------------------------------------------------------------------
# fractional heat profile rho_alpha = F^{-1}(exp(-|xi|^{2 alpha}))


def stable_tail_coefficients(n: int, alpha: float, terms: int = 80) -> np.ndarray:
    """Coefficients a_j of rho_alpha(r) ~ sum_j a_j r^{-n - 2 alpha j}.

    a_j = pi^{-n/2} (-1)^j / j! * 4^{alpha j} Gamma(n/2 + alpha j) / Gamma(-alpha j).
    Convergent for alpha < 1/2, convergent for r > 1 at alpha = 1/2 and
    asymptotic otherwise.
    """
    j = np.arange(1, terms + 1, dtype=float)
    logmag = (
        -0.5 * n * math.log(math.pi)
        - np.array([math.lgamma(x + 1) for x in j])
        + alpha * j * math.log(4.0)
        + np.array([math.lgamma(n / 2 + alpha * x) for x in j])
    )
    return (-1.0) ** j * np.exp(logmag) * rgamma(-alpha * j)


def _tail_series(n: int, alpha: float, r: float, coeffs: np.ndarray, rtol: float = 1e-15):
    """Evaluate the large-r series; None when it is not accurate at r."""
    if alpha >= 1.0 or r <= 0:
        return None
    total = 0.0
    prev = math.inf
    for j, a in enumerate(coeffs, start=1):
        if a == 0.0:
            continue
        term = a * r ** (-n - 2 * alpha * j)
        total += term
        if abs(term) <= rtol * abs(total):
            return total
        if abs(term) > prev:
            return None
        prev = abs(term)
    return None


def fourier_radial_inverse(n: int, alpha: float, r: float, spec: QuadSpec = DEFAULT_SPEC) -> float:
    """rho_alpha(r) by direct quadrature of the radial inverse Fourier integral.

    rho_alpha(r) = (2 pi)^{-n/2} int_0^inf exp(-k^{2a}) [J_nu(kr)/(kr)^nu] k^{n-1} dk,
    nu = n/2 - 1. The oscillatory range is split at multiples of pi / r.
    """
    nu = n / 2.0 - 1.0
    kmax = 42.0 ** (1.0 / (2.0 * alpha))
    pref = (2.0 * math.pi) ** (-n / 2.0)
    if r == 0.0:
        return pref * 2.0 ** (-nu) / math.gamma(nu + 1) * math.gamma(n / (2 * alpha)) / (2 * alpha)

    def integrand(k):
        z = k * r
        if n == 1:
            bessel = math.sqrt(2.0 / math.pi) * np.cos(z)
        elif n == 3:
            with np.errstate(invalid="ignore", divide="ignore"):
                bessel = math.sqrt(2.0 / math.pi) * np.where(z > 0, np.sin(z) / np.where(z > 0, z, 1.0), 1.0)
        else:
            with np.errstate(invalid="ignore", divide="ignore"):
                bessel = np.where(z > 1e-8, jv(nu, z) / np.where(z > 1e-8, z, 1.0) ** nu,
                                  2.0 ** (-nu) / math.gamma(nu + 1))
        return np.exp(-(k ** (2 * alpha))) * bessel * k ** (n - 1)

    n_panels = int(math.ceil(kmax * r / math.pi))
    if n_panels > 20000:
        raise QuadratureError(
            f"rho_alpha quadrature at r={r} needs {n_panels} oscillation panels; "
            "use a radial grid whose large-r part is covered by the tail series"
        )
    points = tuple(math.pi * (i + 0.5) / r for i in range(n_panels))
    res = adaptive_1d(integrand, 0.0, kmax, spec, points=points)
    if not res.converged:
        raise QuadratureError(f"rho_alpha quadrature did not converge at r={r}: {res}", res)
    return pref * res.value


def rho_alpha_profile(
    n: int,
    alpha: float,
    radii=None,
    spec: QuadSpec = DEFAULT_SPEC,
    r_max: float = 1e3,
    points: int = 400,
) -> RadialProfile:
    """Tabulated profile of the fractional heat kernel at time 1.

    Values come from :func:`fourier_radial_inverse` at small radii and from
    the large-r stable series where it is accurate. Interpolation is a
    cubic spline of ``log rho_alpha`` against ``asinh r``; beyond the grid
    the series is evaluated directly. ``alpha = 1`` returns the exact
    Gaussian.
    """
    n = check_dimension(n)
    alpha = check_alpha(alpha, allow_one=True)
    if alpha == 1.0:
        c = (4.0 * math.pi) ** (-n / 2.0)
        return RadialProfile(
            dim=n,
            kind="rho_alpha",
            fn=lambda r: c * np.exp(-r * r / 4.0),
            derivative=lambda r: -0.5 * r * c * np.exp(-r * r / 4.0),
            log_ratio_fn=lambda r1, r0: -(r1 - r0) * (r1 + r0) / 4.0,
            params={"alpha": 1.0},
            mass=1.0,
        )
    if radii is None:
        radii = np.sinh(np.linspace(0.0, math.asinh(r_max), points))
    radii = np.asarray(radii, dtype=float)
    if radii[0] != 0.0 or np.any(np.diff(radii) <= 0):
        raise ValueError("radial grid must start at 0 and increase strictly")
    coeffs = stable_tail_coefficients(n, alpha)
    values = np.empty_like(radii)
    series_from = None
    for i, r in enumerate(radii):
        s = _tail_series(n, alpha, r, coeffs) if r >= 1.0 else None
        if s is not None:
            values[i] = s
            if series_from is None:
                series_from = r
        else:
            values[i] = fourier_radial_inverse(n, alpha, float(r), spec.tightened(1e4))
    if np.any(values <= 0):
        bad = radii[values <= 0][0]
        raise QuadratureError(f"rho_alpha lost positivity at r={bad}; refine the radial grid or tolerances")
    r_top = float(radii[-1])
    if _tail_series(n, alpha, r_top, coeffs) is None:
        raise QuadratureError(
            f"tail series not accurate at the grid end r={r_top}; extend r_max for alpha={alpha}"
        )
    xs = np.arcsinh(radii)
    spline = CubicSpline(xs, np.log(values), bc_type=((1, 0.0), "not-a-knot"))
    d1, d2, d3 = (spline.derivative(k) for k in (1, 2, 3))
    a1 = float(coeffs[0])
    s_tail = n + 2 * alpha

    def tail_correction(r):
        """T(r) with rho_alpha = a_1 r^{-s} (1 + T(r)) beyond the grid."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        prev = np.full_like(r, np.inf)
        live = np.ones(r.shape, dtype=bool)
        for j, a in enumerate(coeffs[1:], start=2):
            if a == 0.0:
                continue
            term = (a / a1) * r ** (-2 * alpha * (j - 1))
            live &= np.abs(term) < prev
            out = out + np.where(live, term, 0.0)
            prev = np.abs(term)
            if not np.any(live & (np.abs(term) > 1e-17 * (1.0 + np.abs(out)))):
                break
        return out

    def log_in(r):
        return spline(np.arcsinh(r))

    def log_out(r):
        return math.log(a1) - s_tail * np.log(r) + np.log1p(tail_correction(r))

    def log_fn(r):
        r = np.asarray(r, dtype=float)
        inside = r <= r_top
        out = np.empty_like(r)
        out[inside] = log_in(r[inside])
        if np.any(~inside):
            out[~inside] = log_out(r[~inside])
        return out

    def fn(r):
        return np.exp(log_fn(r))

    def deriv(r):
        r = np.asarray(r, dtype=float)
        inside = r <= r_top
        out = np.empty_like(r)
        ri = r[inside]
        out[inside] = np.exp(log_in(ri)) * d1(np.arcsinh(ri)) / np.sqrt(1.0 + ri * ri)
        if np.any(~inside):
            ro = r[~inside]
            h = 1e-5 * ro
            dlog = (-s_tail * np.log1p(2 * h / (ro - h))
                    + np.log1p(tail_correction(ro + h)) - np.log1p(tail_correction(ro - h))) / (2 * h)
            out[~inside] = fn(ro) * dlog
        return out

    def log_ratio(r1, r0):
        """log rho_alpha(r1) - log rho_alpha(r0), free of cancellation for r1 near r0."""
        r1 = np.asarray(r1, dtype=float)
        out = np.empty_like(r1)
        in1 = r1 <= r_top
        if r0 <= r_top:
            x0 = math.asinh(r0)
            ri = r1[in1]
            # asinh(r1) - asinh(r0) without cancellation
            dx = np.arcsinh((ri - r0) * (ri + r0) / (ri * math.sqrt(1 + r0 * r0) + r0 * np.sqrt(1 + ri * ri)))
            near = np.abs(dx) < 1e-3
            taylor = dx * (float(d1(x0)) + dx * (float(d2(x0)) / 2 + dx * float(d3(x0)) / 6))
            direct = spline(x0 + dx) - float(spline(x0))
            out[in1] = np.where(near, taylor, direct)
            if np.any(~in1):
                out[~in1] = log_out(r1[~in1]) - float(spline(x0))
        else:
            ro = r1[~in1]
            t0 = float(tail_correction(np.array(r0)))
            out[~in1] = -s_tail * np.log1p((ro - r0) / r0) + np.log1p(tail_correction(ro)) - math.log1p(t0)
            if np.any(in1):
                out[in1] = log_in(r1[in1]) - float(log_out(np.array(r0)))
        return out

    # mass: tabulated part plus the series tail
    head = adaptive_1d(lambda r: fn(r) * r ** (n - 1), 0.0, r_top, spec,
                       points=tuple(radii[1:-1:max(1, len(radii) // 50)]))
    j = np.arange(1, len(coeffs) + 1)
    tail_mass = float(np.sum(coeffs * r_top ** (-2 * alpha * j) / (2 * alpha * j)))
    mass = sphere_area(n) * (head.value + tail_mass)

    return RadialProfile(
        dim=n,
        kind="rho_alpha",
        fn=fn,
        derivative=deriv,
        log_ratio_fn=log_ratio,
        params={"alpha": alpha, "series_from": series_from},
        tail=(float(coeffs[0]), n + 2 * alpha),
        mass=mass,
        radii=radii,
        values=values,
    )
