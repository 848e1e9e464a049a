"""Half-heat kernel, the half-Laplacian and the identities it satisfies.

Two independent evaluations of (-Delta)^{1/2}:

* :func:`half_laplacian_pv` -- the singular integral
  ``c_n PV int (f(x) - f(y)) / |x - y|^{n+1} dy`` by adaptive quadrature of
  the symmetrised second difference;
* :func:`half_laplacian_spectral` -- the Fourier multiplier ``|xi|^{2 alpha}``
  on a periodic grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .profiles import (
    RadialProfile,
    check_alpha,
    check_dimension,
    eta_profile,
    half_heat_constant,
    rho,
    rho_profile,
    y_dot_grad_rho,
    y_dot_grad_rho_profile,
    y_dot_grad_y_dot_grad_rho,
)
from .quadrature import DEFAULT_SPEC, IntegralResult, QuadSpec, QuadratureError, adaptive_1d, sphere_area

__all__ = [
    "EtaBound",
    "GridField",
    "IdentityResiduals",
    "eta_bound_ratio",
    "half_laplacian_pv",
    "half_laplacian_spectral",
    "heat_kernel",
    "kernel_identity_residuals",
    "periodization_bound",
    "rho_and_radial_derivative",
]


def heat_kernel(x, t: float, n: int):
    """P_t(x) = b_n t / (t^2 + |x|^2)^{(n+1)/2}; ``x`` has trailing axis n (or is 1-D for n = 1)."""
    n = check_dimension(n)
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    if n == 1 and not (x.ndim >= 2 and x.shape[-1] == 1):
        r2 = x * x
    else:
        if x.shape[-1] != n:
            raise ValueError(f"points must have trailing axis of length {n}")
        r2 = np.sum(x * x, axis=-1)
    return half_heat_constant(n) * t * (t * t + r2) ** (-(n + 1) / 2.0)


def rho_and_radial_derivative(y, n: int):
    """(rho(y), y . grad rho(y)) for points ``y`` of shape (..., n)."""
    n = check_dimension(n)
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != n:
        raise ValueError(f"points must have trailing axis of length {n}")
    r = np.sqrt(np.sum(y * y, axis=-1))
    return rho(r, n), y_dot_grad_rho(r, n)


# ---------------------------------------------------------------------------
# principal value


def _pv_core(second_diff, n: int, r: float, spec: QuadSpec, half_range: float, ang_weight) -> IntegralResult:
    """c_n * int_0^inf s^{-2} int_0^{half_range} D(s, phi) w(phi) dphi ds.

    ``second_diff(s, phis)`` returns ``2 f(x) - f(x + s w) - f(x - s w)``.
    The inner integral is computed divided by ``s^2`` so that inner
    tolerances apply directly to the outer integrand.
    """
    cn = half_heat_constant(n)
    inner_spec = spec.tightened(10.0)
    stats = {"evals": 0, "ok": True, "worst": 0.0}

    if n == 1:
        def outer(s):
            return second_diff(s, None) / (s * s)
    else:
        def one(s):
            res = adaptive_1d(lambda ph: second_diff(s, ph) * ang_weight(ph), 0.0, half_range, inner_spec)
            stats["evals"] += res.evaluations
            stats["ok"] = stats["ok"] and res.converged
            stats["worst"] = max(stats["worst"], res.err_est / (s * s))
            return res.value / (s * s)

        def outer(s):
            return np.array([one(float(v)) for v in s])

    bps = {1.0}
    if r > 0:
        bps.update({r, max(r - 1.0, 0.5 * r), r + 1.0, 2.0 * r})
    bps = tuple(sorted(b for b in bps if b > 0))
    near = adaptive_1d(outer, 0.0, 1.0, spec, points=tuple(b for b in bps if b < 1.0))
    far = adaptive_1d(outer, 1.0, math.inf, spec, points=tuple(b for b in bps if b > 1.0))
    tot = near + far
    err = cn * (tot.err_est + stats["worst"] * half_range)
    value = cn * tot.value
    converged = tot.converged and stats["ok"]
    return IntegralResult(value, err, tot.evaluations + stats["evals"], converged)


def _pv_axisymmetric(g, g0: float, n: int, r: float, spec: QuadSpec) -> IntegralResult:
    """PV at the point x = r e_1 of a function g(|y|, y . e_1) with g(x) = g0."""
    if n == 1:
        def d1(s, _):
            a, b = r + s, r - s
            return 2.0 * g0 - g(np.abs(a), a) - g(np.abs(b), b)
        return _pv_core(d1, 1, r, spec, 1.0, None)

    weight = sphere_area(n - 1)

    def dn(s, phis):
        c = np.cos(phis)
        plus2 = r * r + s * s + 2.0 * r * s * c
        minus2 = r * r + s * s - 2.0 * r * s * c
        return 2.0 * g0 - g(np.sqrt(plus2), r + s * c) - g(np.sqrt(np.maximum(minus2, 0.0)), r - s * c)

    if n == 2:
        ang = lambda ph: np.ones_like(ph)
    else:
        ang = lambda ph: np.sin(ph) ** (n - 2)
    res = _pv_core(dn, n, r, spec, 0.5 * math.pi, ang)
    return res.scaled(weight)


def half_laplacian_pv(f, x, spec: QuadSpec = DEFAULT_SPEC, n: Optional[int] = None) -> IntegralResult:
    """(-Delta)^{1/2} f at x by adaptive quadrature of the singular integral.

    ``f`` is either a :class:`RadialProfile` (any dimension up to 5; ``x``
    may be a point or a radius) or a callable on points of shape (..., n)
    for n <= 2 (for n = 1 a callable on scalars arrays). Raises
    :class:`QuadratureError` if the integral does not converge, e.g. when
    f grows too fast for the far field to be integrable.
    """
    if isinstance(f, RadialProfile):
        n = f.dim
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        r = float(np.sqrt(np.sum(xa * xa)))
        fx = float(f(np.array(r)))
        res = _pv_axisymmetric(lambda a, _b: f(a), fx, n, r, spec)
    else:
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        n = check_dimension(n if n is not None else xa.shape[-1])
        if n > 2:
            raise ValueError("general (non-radial) callables are supported for n <= 2; pass a RadialProfile")
        if xa.shape != (n,):
            raise ValueError(f"x must be a point in R^{n}")
        if n == 1:
            x0 = float(xa[0])
            fx = float(f(np.array([x0]))[0])

            def d1(s, _):
                return 2.0 * fx - f(x0 + s) - f(x0 - s)
            res = _pv_core(d1, 1, abs(x0), spec, 1.0, None)
        else:
            fx = float(np.asarray(f(xa[None, :]))[0])

            def d2(s, phis):
                w = np.stack([np.cos(phis), np.sin(phis)], axis=-1)
                return 2.0 * fx - f(xa + s * w) - f(xa - s * w)
            # (1/2) * int_0^{2 pi} = int_0^{pi}
            res = _pv_core(d2, 2, float(np.hypot(*xa)), spec, math.pi, lambda ph: np.ones_like(ph))
    if not res.converged:
        raise QuadratureError(f"half-Laplacian quadrature did not converge at x={x}: {res}", res)
    return res


def _x_dot_grad_pv(profile: RadialProfile, r: float, spec: QuadSpec) -> IntegralResult:
    """(-Delta)^{1/2} of y -> x . grad f(y) evaluated at y = x, |x| = r.

    x . grad f(y) = r f'(|y|) (y . e_1) / |y|, an axisymmetric function.
    """
    d = profile.derivative
    if d is None:
        raise ValueError("profile derivative required")

    def g(a, along):
        a = np.asarray(a, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(a > 0, r * d(a) * along / np.where(a > 0, a, 1.0), 0.0)
        return out

    g0 = r * float(d(np.array(r))) if r > 0 else 0.0
    res = _pv_axisymmetric(g, g0, profile.dim, r, spec)
    if not res.converged:
        raise QuadratureError(f"x.grad half-Laplacian quadrature did not converge at r={r}", res)
    return res


@dataclass(frozen=True)
class IdentityResiduals:
    """Absolute residuals of the three pointwise identities for rho at one point."""

    point: np.ndarray
    dim: int
    r_kernel: float
    r_fradot: float
    r_kerfradot: float
    err_est: float
    values: dict

    def max_residual(self) -> float:
        return max(self.r_kernel, self.r_fradot, self.r_kerfradot)


def kernel_identity_residuals(x, n: int, spec: QuadSpec = DEFAULT_SPEC) -> IdentityResiduals:
    """Residuals at x of

    (kernel)     (-Delta)^{1/2} rho = n rho + x . grad rho,
    (fradot)     (-Delta)^{1/2}(x . grad rho) = (-Delta)^{1/2} rho + x . grad (-Delta)^{1/2} rho,
    (kerfradot)  (-Delta)^{1/2}(x . grad rho) = n rho + (1 + n) x . grad rho + x . grad(x . grad rho).

    Every half-Laplacian is a PV quadrature; x . grad of the PV is taken
    under the integral sign, so the three residuals are independent checks.
    """
    n = check_dimension(n)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if xa.size not in (1, n):
        raise ValueError(f"x must be a radius or a point in R^{n}")
    r = float(np.sqrt(np.sum(xa * xa)))
    prof = rho_profile(n)

    hl_rho = half_laplacian_pv(prof, r, spec)
    hl_xg = half_laplacian_pv(y_dot_grad_rho_profile(n), r, spec)
    xg_hl = _x_dot_grad_pv(prof, r, spec)
    rho_r = float(rho(r, n))
    xg = float(y_dot_grad_rho(r, n))
    xgxg = float(y_dot_grad_y_dot_grad_rho(r, n))

    kernel_rhs = n * rho_r + xg
    kerfradot_rhs = n * rho_r + (1 + n) * xg + xgxg
    return IdentityResiduals(
        point=xa,
        dim=n,
        r_kernel=abs(hl_rho.value - kernel_rhs),
        r_fradot=abs(hl_xg.value - hl_rho.value - xg_hl.value),
        r_kerfradot=abs(hl_xg.value - kerfradot_rhs),
        err_est=hl_rho.err_est + hl_xg.err_est + xg_hl.err_est,
        values={
            "half_lap_rho": hl_rho.value,
            "half_lap_x_grad_rho": hl_xg.value,
            "x_grad_half_lap_rho": xg_hl.value,
            "kernel_rhs": kernel_rhs,
            "kerfradot_rhs": kerfradot_rhs,
        },
    )


# ---------------------------------------------------------------------------
# eta bound


@dataclass(frozen=True)
class EtaBound:
    delta: float
    dim: int
    radii: np.ndarray
    ratios: np.ndarray
    max_ratio: float
    argmax: float


def eta_bound_ratio(delta: float, n: int, radii: Iterable[float], spec: QuadSpec = DEFAULT_SPEC) -> EtaBound:
    """|(-Delta)^{1/2} eta| / eta at each radius, eta = (1 + |x|)^{-delta}.

    ``eta`` has a conical point at the origin where its half-Laplacian is
    logarithmically infinite, so radii must be positive.
    """
    n = check_dimension(n)
    prof = eta_profile(n, delta)
    radii = np.asarray(list(radii), dtype=float)
    if radii.size == 0:
        raise ValueError("no radii given")
    if np.any(radii <= 0) or not np.all(np.isfinite(radii)):
        raise ValueError("radii must be positive and finite: the half-Laplacian of eta is infinite at 0")
    ratios = np.empty_like(radii)
    for i, r in enumerate(radii):
        v = half_laplacian_pv(prof, float(r), spec).value
        ratios[i] = abs(v) / float(prof(np.array(r)))
    k = int(np.argmax(ratios))
    return EtaBound(delta=float(delta), dim=n, radii=radii, ratios=ratios, max_ratio=float(ratios[k]),
                    argmax=float(radii[k]))


# ---------------------------------------------------------------------------
# periodic grid


@dataclass
class GridField:
    """Samples on the periodic box [-L, L)^dim with N points per axis."""

    dim: int
    L: float
    N: int
    values: np.ndarray

    def __post_init__(self):
        self.dim = check_dimension(self.dim)
        if not self.L > 0:
            raise ValueError("box half-width L must be positive")
        if self.N < 2 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two, got {self.N}")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.N,) * self.dim:
            raise ValueError(f"values must have shape {(self.N,) * self.dim}, got {self.values.shape}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    def mesh(self) -> list[np.ndarray]:
        ax = self.axis()
        return np.meshgrid(*([ax] * self.dim), indexing="ij")

    def wavenumber_modulus(self) -> np.ndarray:
        """|xi| on the rfftn layout."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.h)
        kr = 2.0 * np.pi * np.fft.rfftfreq(self.N, d=self.h)
        axes = [k] * (self.dim - 1) + [kr]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.sqrt(sum(g * g for g in grids))

    @classmethod
    def from_function(cls, fn: Callable, dim: int, L: float, N: int) -> "GridField":
        """Sample ``fn`` on the grid; ``fn`` takes the ``dim`` coordinate arrays."""
        tmp = cls(dim, L, N, np.zeros((N,) * dim))
        return cls(dim, L, N, np.asarray(fn(*tmp.mesh()), dtype=float))

    def with_values(self, values) -> "GridField":
        return GridField(self.dim, self.L, self.N, values)


def half_laplacian_spectral(field: GridField, alpha: float = 0.5) -> GridField:
    """(-Delta)^alpha by the Fourier multiplier |xi|^{2 alpha} on the periodic box."""
    alpha = check_alpha(alpha, allow_one=True)
    mult = field.wavenumber_modulus() ** (2.0 * alpha)
    axes = tuple(range(field.dim))
    out = np.fft.irfftn(np.fft.rfftn(field.values, axes=axes) * mult, s=field.values.shape, axes=axes)
    return field.with_values(out)


def periodization_bound(fn: Callable, half_lap_fn: Callable, field: GridField, images: int = 4000) -> np.ndarray:
    """Bound on |spectral - exact| half-Laplacian for fn sampled on a 1-D box.

    The grid holds fn on [-L, L) continued periodically, which is the
    periodization of fn minus R = sum_{k != 0} fn(x + 2Lk) on the box. The
    discrepancy is therefore sum_{k != 0} half_lap_fn(x + 2Lk) minus the
    half-Laplacian of R; the bound is the sum of their moduli, with the
    image sums cut at ``images`` and their remainders estimated from the
    last terms (which decay at least like k^{-2}).
    """
    if field.dim != 1:
        raise ValueError("the periodization bound is implemented for n = 1")
    x = field.axis()
    period = 2.0 * field.L
    img_h = np.zeros_like(x)
    img_f = np.zeros_like(x)
    for k in range(1, images + 1):
        for sgn in (1.0, -1.0):
            img_h += half_lap_fn(x + sgn * k * period)
            img_f += fn(x + sgn * k * period)
    last_h = np.abs(half_lap_fn(x + images * period)) + np.abs(half_lap_fn(x - images * period))
    last_f = np.abs(fn(x + images * period)) + np.abs(fn(x - images * period))
    hR = half_laplacian_spectral(field.with_values(img_f)).values
    # the remainder of the fn images is nearly constant on the box, which
    # the half-Laplacian ignores; only its variation matters
    return np.abs(img_h) + images * last_h + np.abs(hR) + 2.0 * images * float(np.max(last_f)) / field.L
