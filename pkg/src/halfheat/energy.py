"""Weighted energies, Pohozaev-type identities and the monotonicity defect.

Every quantity is assembled from a handful of integrals of a profile w:

    B_rho   = iint (w(y') - w(y))^2 / |y'-y|^{n+1} rho(y') dy' dy
    B_drho  = iint (w(y') - w(y))^2 / |y'-y|^{n+1} (y'.grad rho)(y') dy' dy
    X       = iint (w(y') - w(y)) (rho(y') - rho(y)) / |y'-y|^{n+1} (y.grad w)(y) dy' dy

plus single weighted integrals. Two representations are supported: a
radial closed form (:class:`RadialProfile`, any n <= 5) handled by nested
adaptive quadrature, and samples on a one-dimensional grid
(:class:`SampledField`) handled by product trapezoid sums of difference
quotients, whose diagonal is filled with the derivative limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .kernel import GridField
from .profiles import (
    RadialProfile,
    check_dimension,
    half_heat_constant,
    q_n,
    rho,
    y_dot_grad_rho,
)
from .quadrature import DEFAULT_SPEC, IntegralResult, QuadSpec, adaptive_1d, radial_kernel_integral, sphere_area

__all__ = [
    "EnergyBreakdown",
    "EnergyTrace",
    "PohozaevResiduals",
    "ProfileField",
    "SampledField",
    "TraceSample",
    "cominq_coefficient",
    "cross_term_bound",
    "energy",
    "epsilon_band",
    "monotonicity_constants",
    "monotonicity_defect",
    "pohozaev_residuals",
    "profile_integrals",
    "q_n",
]


# ---------------------------------------------------------------------------
# representations


@dataclass(frozen=True)
class SampledField:
    """A function on the line known at nodes ``y`` with quadrature ``weights``.

    ``dvalues`` holds w'(y) at the nodes. ``truncation`` bounds the part of
    the line the nodes do not cover, as an absolute error on the integrals.
    When ``outside`` is set, w is taken to equal that constant beyond the
    nodes and the exterior contributions are added in closed form.
    """

    y: np.ndarray
    values: np.ndarray
    dvalues: np.ndarray
    weights: np.ndarray
    truncation: float = 0.0
    outside: Optional[float] = None

    def __post_init__(self):
        for name in ("y", "values", "dvalues", "weights"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 1 or arr.shape != np.shape(self.y):
                raise ValueError(f"{name} must be a 1-D array matching y")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.y) <= 0):
            raise ValueError("nodes must increase strictly")

    @staticmethod
    def sinh_nodes(lo: float = -math.inf, hi: float = math.inf, scale: float = 1.0, step: float = 0.05,
                   xi_max: float = 24.0):
        """Nodes y = scale * sinh(xi) on a uniform xi grid, clipped to [lo, hi]."""
        a = -xi_max if lo == -math.inf else math.asinh(lo / scale)
        b = xi_max if hi == math.inf else math.asinh(hi / scale)
        m = max(int(math.ceil((b - a) / step)), 8)
        xi = np.linspace(a, b, m + 1)
        y = scale * np.sinh(xi)
        w = scale * np.cosh(xi) * (b - a) / m
        w[0] *= 0.5
        w[-1] *= 0.5
        return y, w

    @classmethod
    def from_callable(cls, fn, dfn, lo: float = -math.inf, hi: float = math.inf, scale: float = 1.0,
                      step: float = 0.05, xi_max: float = 24.0, bound: Optional[float] = None) -> "SampledField":
        y, w = cls.sinh_nodes(lo, hi, scale, step, xi_max)
        vals = np.asarray(fn(y), dtype=float)
        dvals = np.asarray(dfn(y), dtype=float)
        sup = float(np.max(np.abs(vals))) if bound is None else bound
        return cls(y, vals, dvals, w, truncation=_truncation_bound(y, sup))

    @classmethod
    def from_grid(cls, g: GridField) -> "SampledField":
        """Samples of a periodic 1-D grid field on its box; w' is spectral."""
        if g.dim != 1:
            raise ValueError("sampled energies are implemented for n = 1 only")
        k = 2.0 * np.pi * np.fft.rfftfreq(g.N, d=g.h)
        dv = np.fft.irfft(1j * k * np.fft.rfft(g.values), n=g.N)
        y = g.axis()
        w = np.full(g.N, g.h)
        return cls(y, g.values, dv, w, truncation=_truncation_bound(y, float(np.max(np.abs(g.values)))))


def _truncation_bound(y: np.ndarray, sup: float) -> float:
    # mass of rho (n = 1) outside the nodes, and the unweighted tail of the
    # double integrals, both O(sup^2 / Y)
    lo, hi = float(-y[0]), float(y[-1])
    if lo <= 0 or hi <= 0:
        return math.inf
    y_min = min(lo, hi)
    tail_rho = 2.0 / y_min
    return (sup * sup + sup ** 3 + 4.0 * sup * sup * math.pi) * tail_rho


Representation = Union[RadialProfile, SampledField]


@dataclass(frozen=True)
class ProfileField:
    """A profile w together with the exponent p (beta = 1/(p-1))."""

    dim: int
    p: float
    w: Representation

    def __post_init__(self):
        check_dimension(self.dim)
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if isinstance(self.w, SampledField):
            if self.dim != 1:
                raise ValueError("sampled profiles are supported in dimension 1 only")
        elif isinstance(self.w, RadialProfile):
            if self.w.dim != self.dim:
                raise ValueError("profile dimension mismatch")
            if self.w.derivative is None:
                raise ValueError("radial profiles need a derivative")
        else:
            raise TypeError("w must be a RadialProfile or a SampledField")

    @property
    def beta(self) -> float:
        return 1.0 / (self.p - 1.0)


# ---------------------------------------------------------------------------
# the building-block integrals


@dataclass(frozen=True)
class ProfileIntegrals:
    B_rho: float
    B_drho: float
    X: float
    w2_rho: float
    w2_drho: float
    wp_rho: float
    wp_drho: float
    gradw2_rho: float
    err_est: float


def _rho_tail_kernel(a: np.ndarray, H: float) -> np.ndarray:
    """int_H^inf dt / ((1 + t^2) (t - a)^2) for a < H (partial fractions)."""
    a = np.asarray(a, dtype=float)
    q = 1.0 + a * a
    A = -2.0 * a / (q * q)
    B = 1.0 / q
    D = (a * a - 1.0) / (q * q)
    return (-A * (np.log(H - a) - 0.5 * math.log1p(H * H)) + B / (H - a)
            + D * (0.5 * math.pi - math.atan(H)))


def _exterior_terms(sf: SampledField, p: float, c: float, r1, yd, ydw) -> np.ndarray:
    y, w, W = sf.y, sf.values, sf.weights
    hi, lo = float(y[-1]), float(y[0])
    dv = w - c
    # the end nodes sit on the cut; their own-side terms are dropped (they
    # carry a half weight times a negligible rho and w - c ~ 0 there)
    inner = slice(1, -1)
    near = np.zeros_like(y)
    near[inner] = 1.0 / (hi - y[inner]) + 1.0 / (y[inner] - lo)
    near[0] = 1.0 / (hi - lo)
    near[-1] = near[0]
    # y' inside, y outside: int_out dy / (y - y')^2
    A_rho = float(W @ (r1 * dv * dv * near))
    A_drho = float(W @ (yd * dv * dv * near))
    # y' outside, y inside: the rho weight is integrated in closed form and
    # y.grad rho ~ -2 rho in the far field
    F = np.zeros_like(y)
    F[inner] = _rho_tail_kernel(y[inner], hi) + _rho_tail_kernel(-y[inner], -lo)
    F[0] = _rho_tail_kernel(y[:1], hi)[0]
    F[-1] = _rho_tail_kernel(-y[-1:], -lo)[0]
    B_rho = float(W @ (dv * dv * F))
    X = float(W @ (ydw * (-dv) * (F - r1 * near)))
    rho_tail = (0.5 * math.pi - math.atan(hi)) + (0.5 * math.pi - math.atan(-lo))
    yd_tail = -(rho_tail + hi / (1.0 + hi * hi) + (-lo) / (1.0 + lo * lo))
    ac = abs(c)
    return np.array([A_rho + B_rho, A_drho - 2.0 * B_rho, X, c * c * rho_tail, c * c * yd_tail,
                     ac ** (p + 1) * rho_tail, ac ** (p + 1) * yd_tail, 0.0, B_rho])


def _exterior(sf: SampledField, p: float, r1, yd, ydw) -> tuple[np.ndarray, float]:
    """Contributions of the region beyond the nodes where w equals ``sf.outside``.

    The error bar is the change in these contributions when the exterior
    value moves by the mismatch between the two ends (or by its own size),
    plus the far-field approximation of y.grad rho.
    """
    c = float(sf.outside)
    corr = _exterior_terms(sf, p, c, r1, yd, ydw)
    delta = max(abs(c), abs(float(sf.values[0])), abs(float(sf.values[-1])), 1e-300)
    spread = 0.0
    for cc in (c - delta, c + delta):
        spread = max(spread, float(np.sum(np.abs(_exterior_terms(sf, p, cc, r1, yd, ydw)[:8] - corr[:8]))))
    Y = min(float(sf.y[-1]), float(-sf.y[0]))
    err = spread + abs(corr[8]) * 4.0 / (Y * Y)
    return corr[:8], err


def _sampled_integrals(sf: SampledField, p: float, block: int = 512) -> ProfileIntegrals:
    y, w, dw, W = sf.y, sf.values, sf.dvalues, sf.weights
    r1 = rho(y, 1)
    yd = y_dot_grad_rho(y, 1)
    drho = -2.0 * y * (1.0 + y * y) ** -2  # rho'(y)
    ydw = y * dw
    B_rho = B_drho = X = 0.0
    for start in range(0, len(y), block):
        sl = slice(start, start + block)
        gap = y[sl, None] - y[None, :]
        dwv = w[sl, None] - w[None, :]
        drv = r1[sl, None] - r1[None, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            inv2 = np.where(gap != 0, 1.0 / np.where(gap != 0, gap, 1.0) ** 2, 0.0)
        Q = dwv * dwv * inv2
        P = dwv * drv * inv2
        idx = np.arange(sl.start, min(sl.stop, len(y)))
        Q[idx - start, idx] = dw[idx] ** 2
        P[idx - start, idx] = dw[idx] * drho[idx]
        # row index is y, column index y'
        B_rho += float(W[sl] @ (Q @ (W * r1)))
        B_drho += float(W[sl] @ (Q @ (W * yd)))
        X += float((W[sl] * ydw[sl]) @ (P @ W))
    absw = np.abs(w)
    vals = np.array([
        B_rho,
        B_drho,
        X,
        float(W @ (w * w * r1)),
        float(W @ (w * w * yd)),
        float(W @ (absw ** (p + 1) * r1)),
        float(W @ (absw ** (p + 1) * yd)),
        float(W @ (ydw * ydw * r1)),
    ])
    err = sf.truncation
    if sf.outside is not None:
        corr, cerr = _exterior(sf, p, r1, yd, ydw)
        vals = vals + corr
        err = err + cerr
    return ProfileIntegrals(*(float(v) for v in vals), err_est=err)


def _radial_integrals(wp: RadialProfile, n: int, p: float, spec: QuadSpec) -> ProfileIntegrals:
    area = sphere_area(n)
    dw = wp.derivative
    inner_spec = spec.tightened(10.0)
    errs = []

    def quotient(rp, r):
        gap = rp - r
        small = np.abs(gap) < 1e-6 * (1.0 + r)
        with np.errstate(invalid="ignore", divide="ignore"):
            dq = (wp(rp) - float(wp(np.array(r)))) / np.where(small, 1.0, gap)
        return np.where(small, dw(0.5 * (rp + r)), dq)

    def rho_quotient(rp, r):
        gap = rp - r
        small = np.abs(gap) < 1e-6 * (1.0 + r)
        with np.errstate(invalid="ignore", divide="ignore"):
            dq = (rho(rp, n) - float(rho(r, n))) / np.where(small, 1.0, gap)
        mid = 0.5 * (rp + r)
        return np.where(small, -(n + 1) * mid * (1.0 + mid * mid) ** (-(n + 3) / 2.0), dq)

    def inner(weight_of_rp, with_rho_diff=False):
        def per_r(r):
            if with_rho_diff:
                q = lambda rp: quotient(rp, r) * rho_quotient(rp, r)
            else:
                q = lambda rp: quotient(rp, r) ** 2 * weight_of_rp(rp)
            res = radial_kernel_integral(q, n, "all", r, inner_spec)
            errs.append(res.err_est)
            return res.value
        return per_r

    def outer_integral(per_r, extra=None):
        def f(rs):
            vals = np.array([per_r(float(r)) for r in rs])
            if extra is not None:
                vals = vals * extra(rs)
            return area * rs ** (n - 1) * vals
        res = adaptive_1d(f, 0.0, math.inf, spec, points=(1.0,))
        return res

    B1 = outer_integral(inner(lambda rp: rho(rp, n)))
    B2 = outer_integral(inner(lambda rp: y_dot_grad_rho(rp, n)))
    X = outer_integral(inner(None, with_rho_diff=True), extra=lambda rs: rs * dw(rs))

    def single(g):
        return adaptive_1d(lambda r: area * r ** (n - 1) * g(r), 0.0, math.inf, spec, points=(1.0,))

    absw = lambda r: np.abs(wp(r))
    singles = [
        single(lambda r: wp(r) ** 2 * rho(r, n)),
        single(lambda r: wp(r) ** 2 * y_dot_grad_rho(r, n)),
        single(lambda r: absw(r) ** (p + 1) * rho(r, n)),
        single(lambda r: absw(r) ** (p + 1) * y_dot_grad_rho(r, n)),
        single(lambda r: (r * dw(r)) ** 2 * rho(r, n)),
    ]
    results = [B1, B2, X, *singles]
    for res in results:
        res.require("profile integral")
    err = sum(r.err_est for r in results) + (max(errs) if errs else 0.0)
    return ProfileIntegrals(B1.value, B2.value, X.value, *(s.value for s in singles), err_est=err)


def profile_integrals(w: ProfileField, spec: QuadSpec = DEFAULT_SPEC) -> ProfileIntegrals:
    if isinstance(w.w, SampledField):
        return _sampled_integrals(w.w, w.p)
    return _radial_integrals(w.w, w.dim, w.p, spec)


# ---------------------------------------------------------------------------
# energies


@dataclass(frozen=True)
class EnergyBreakdown:
    bilinear: float
    mass: float
    halflap_weight: float
    potential: float
    E: float
    E_hat: float
    err_est: float = 0.0


def _energy_from(I: ProfileIntegrals, n: int, p: float) -> EnergyBreakdown:
    beta = 1.0 / (p - 1.0)
    cn = half_heat_constant(n)
    bilinear = cn / 4.0 * I.B_rho
    mass = beta / 2.0 * I.w2_rho
    # (-Delta)^{1/2} rho = n rho + y.grad rho
    halflap = (n * I.w2_rho + I.w2_drho) / (2.0 * (p + 1.0))
    potential = I.wp_rho / (p + 1.0)
    E = bilinear + mass - potential
    return EnergyBreakdown(bilinear, mass, halflap, potential, E, E + halflap, I.err_est)


def energy(w: ProfileField, spec: QuadSpec = DEFAULT_SPEC) -> EnergyBreakdown:
    """E[w] and the modified energy E_hat[w] with their four ingredients."""
    return _energy_from(profile_integrals(w, spec), w.dim, w.p)


# ---------------------------------------------------------------------------
# Pohozaev-type identities


@dataclass(frozen=True)
class PohozaevResiduals:
    r_id1: float
    r_id2: float
    r_id3: float
    r_combined: float
    combined_direct: float
    err_est: float

    def as_tuple(self):
        return (self.r_id1, self.r_id2, self.r_id3, self.r_combined)


def pohozaev_residuals(w: ProfileField, spec: QuadSpec = DEFAULT_SPEC) -> PohozaevResiduals:
    """Right-hand sides of the three identities satisfied by steady profiles.

    ``r_combined`` is ``n/(p+1) r_id1 + 1/(p+1) r_id2 + r_id3``;
    ``combined_direct`` evaluates the combined identity term by term, which
    agrees with it for any w because the single integrals cancel.
    """
    I = profile_integrals(w, spec)
    n, p, beta = w.dim, w.p, w.beta
    cn = half_heat_constant(n)
    id1 = cn / 2 * I.B_rho + beta * I.w2_rho - I.wp_rho
    id2 = cn / 2 * I.B_drho + n / 2 * I.w2_rho + (0.5 + beta) * I.w2_drho - I.wp_drho
    id3 = ((1 - n) / 4 * cn * I.B_rho - cn / 4 * I.B_drho - n * beta / 2 * I.w2_rho - beta / 2 * I.w2_drho
           + n / (p + 1) * I.wp_rho + 1 / (p + 1) * I.wp_drho + cn / 2 * I.X + I.gradw2_rho)
    combined = n / (p + 1) * id1 + 1 / (p + 1) * id2 + id3
    direct = ((1 - (p - 1) * n / (p + 1)) * cn / 4 * I.B_rho - (p - 1) / (p + 1) * cn / 4 * I.B_drho
              + cn / 2 * I.X + I.gradw2_rho)
    return PohozaevResiduals(id1, id2, id3, combined, direct, I.err_est)


def cominq_coefficient(n: int, p: float, cnMn: float) -> float:
    """((4 - c_n M_n)/4 - (p-1) n/(p+1)) c_n / 4; zero exactly at p = p_*(n)."""
    n = check_dimension(n)
    return ((4.0 - cnMn) / 4.0 - (p - 1.0) * n / (p + 1.0)) * half_heat_constant(n) / 4.0


def cross_term_bound(w: ProfileField, epsilon: float, Mn: float) -> tuple[float, float]:
    """(I, bound) for the Cauchy-Schwarz estimate of the cross term.

    I = |iint (rho(y')-rho(y))(w(y')-w(y)) / |y'-y|^{n+1} (y.grad w)(y)| and
    bound = (M_n eps / 2) B_rho + (1/(2 eps)) int rho (y.grad w)^2.
    """
    I = profile_integrals(w)
    return abs(I.X), Mn * epsilon / 2.0 * I.B_rho + I.gradw2_rho / (2.0 * epsilon)


# ---------------------------------------------------------------------------
# monotonicity along trajectories


def epsilon_band(n: int, p: float, Mn: float) -> tuple[float, float]:
    """[c_n/4, (p+1 - (p-1) n) / ((p+1) M_n)]; empty when p >= p_*(n)."""
    cn = half_heat_constant(n)
    return cn / 4.0, (p + 1.0 - (p - 1.0) * n) / ((p + 1.0) * Mn)


def monotonicity_constants(n: int, p: float, epsilon: float, Mn: float) -> tuple[float, float, float]:
    """(1 - c_n/(4 eps), d_{n,p,eps}, d_{n,p})."""
    cn = half_heat_constant(n)
    d_eps = ((1.0 - Mn * epsilon) / 4.0 - (p - 1.0) * n / (4.0 * (p + 1.0))) * cn
    d_np = (p - 1.0) * cn / (4.0 * (p + 1.0))
    return 1.0 - cn / (4.0 * epsilon), d_eps, d_np


@dataclass(frozen=True)
class TraceSample:
    """w(., s) and the drift w_s + y . grad w at the same nodes."""

    s: float
    w: SampledField
    drift: np.ndarray


@dataclass
class EnergyTrace:
    s: np.ndarray
    E_hat: np.ndarray
    drift_sq: np.ndarray
    diff_rho: np.ndarray
    diff_drho: np.ndarray
    defect: np.ndarray
    epsilon: float
    d_eps: float
    d_np: float
    margins: np.ndarray = field(default_factory=lambda: np.zeros(0))
    worst_pair: float = 0.0
    tolerance: float = 0.0
    holds: bool = True

    def __post_init__(self):
        if len(self.s) > 1 and np.any(np.diff(self.s) <= 0):
            raise ValueError("trace times must increase strictly")
        for name in ("E_hat", "drift_sq", "diff_rho", "diff_drho", "defect"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite samples in {name}")

    def rows(self):
        for k in range(len(self.s)):
            yield {
                "s": float(self.s[k]),
                "E_hat": float(self.E_hat[k]),
                "drift_sq": float(self.drift_sq[k]),
                "diff_rho": float(self.diff_rho[k]),
                "diff_drho": float(self.diff_drho[k]),
                "defect": float(self.defect[k]),
            }


def monotonicity_defect(trace: Sequence[TraceSample], p: float, n: int, epsilon: float,
                        Mn: float, spec: QuadSpec = DEFAULT_SPEC) -> EnergyTrace:
    """Samples of E_hat and of the dissipation terms along a trajectory.

    ``defect`` is the integrand of the right side of the monotonicity
    inequality. The check is on the integrated form
    E_hat(s_0) - E_hat(s_k) >= int_{s_0}^{s_k} defect ds - tolerance, with
    the integral by the trapezoid rule; ``margins`` holds the left minus
    the right side for each k. ``worst_pair`` is the smallest such margin
    over all ordered pairs s_a < s_b, which is what ``holds`` tests.
    """
    n = check_dimension(n)
    if n != 1:
        raise ValueError("trajectory energies are implemented for n = 1")
    lo, hi = epsilon_band(n, p, Mn)
    if lo > hi:
        raise ValueError(f"no admissible epsilon: band [{lo:.6g}, {hi:.6g}] is empty (p >= p_*)")
    if not lo - 1e-15 <= epsilon <= hi + 1e-15:
        raise ValueError(f"epsilon={epsilon} outside the admissible band [{lo:.17g}, {hi:.17g}]")
    a, d_eps, d_np = monotonicity_constants(n, p, epsilon, Mn)
    if len(trace) == 0:
        raise ValueError("empty trace")
    s = np.array([t.s for t in trace], dtype=float)
    E_hat, drift_sq, diff_rho, diff_drho, errs = [], [], [], [], []
    for t in trace:
        I = _sampled_integrals(t.w, p)
        E_hat.append(_energy_from(I, n, p).E_hat)
        drift_sq.append(float(t.w.weights @ (t.drift ** 2 * rho(t.w.y, 1))))
        diff_rho.append(I.B_rho)
        diff_drho.append(I.B_drho)
        errs.append(I.err_est)
    E_hat = np.array(E_hat)
    drift_sq = np.array(drift_sq)
    diff_rho = np.array(diff_rho)
    diff_drho = np.array(diff_drho)
    defect = a * drift_sq + d_eps * diff_rho - d_np * diff_drho

    cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(s) * (defect[1:] + defect[:-1]))])
    margins = (E_hat[0] - E_hat) - cum
    # margin(a, b) = margin(b) - margin(a) for a < b
    pair = margins[None, :] - margins[:, None]
    upper = np.triu(np.ones_like(pair, dtype=bool), k=1)
    worst = float(np.min(pair[upper])) if np.any(upper) else 0.0
    # trapezoid error from second differences, plus the energy error bars
    if len(s) >= 3:
        ds = np.diff(s)
        curv = np.abs(np.diff(defect, 2)) / (0.5 * (ds[1:] + ds[:-1])) ** 2
        trap_err = float(np.sum(ds[1:] ** 3 * curv) / 12.0)
    else:
        trap_err = 0.0
    scale = max(1.0, float(np.max(np.abs(E_hat))))
    tol = trap_err + 2.0 * max(errs) + spec.rel_tol * scale
    return EnergyTrace(s=s, E_hat=E_hat, drift_sq=drift_sq, diff_rho=diff_rho, diff_drho=diff_drho,
                       defect=defect, epsilon=float(epsilon), d_eps=d_eps, d_np=d_np, margins=margins,
                       worst_pair=worst, tolerance=tol, holds=bool(worst >= -tol))
