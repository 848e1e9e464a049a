"""Spectral simulation of u_t + (-Delta)^{1/2} u = |u|^{p-1} u on a periodic box.

Time stepping is first-order exponential time differencing: the linear part
is the exact multiplier exp(-dt |xi|), the nonlinearity is frozen over the
step and integrated against phi_1(z) = (1 - e^{-z}) / z. Both kernels are
positive, so nonnegative data stay nonnegative.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .energy import ProfileField, SampledField, TraceSample
from .kernel import GridField, half_laplacian_pv
from .profiles import RadialProfile
from .quadrature import DEFAULT_SPEC, QuadSpec

__all__ = [
    "BlowupOverflow",
    "CauchyState",
    "FitError",
    "LimitProfile",
    "RateFit",
    "SelfSimilarState",
    "SimulationResult",
    "StepControls",
    "limit_profile_classify",
    "rate_fit",
    "self_similar_residual",
    "estimate_blowup_time",
    "from_self_similar",
    "similarity_trace",
    "simulate_to_blowup",
    "terminal_amplitude",
    "stationary_residual",
    "step",
    "to_self_similar",
]


class BlowupOverflow(ArithmeticError):
    """A step produced non-finite values."""


class FitError(ValueError):
    """The sup-norm series does not support a rate fit."""


@dataclass(frozen=True)
class StepControls:
    safety: float = 0.01
    dt_max: float = 0.05
    threshold: float = 1e8
    t_max: float = 100.0
    snapshot_growth: float = 2.0 ** 0.25
    max_steps: int = 2_000_000
    nonlinear: bool = True
    dealias: bool = False

    def __post_init__(self):
        if not 0 < self.safety < 1:
            raise ValueError("safety must lie in (0, 1)")
        if not (self.dt_max > 0 and self.threshold > 0 and self.t_max > 0):
            raise ValueError("dt_max, threshold and t_max must be positive")
        if not self.snapshot_growth > 1:
            raise ValueError("snapshot_growth must exceed 1")

    def scaled(self, lam: float, p: float) -> "StepControls":
        """Controls for data rescaled by u -> lam^beta u(lam x, lam t)."""
        beta = 1.0 / (p - 1.0)
        return replace(self, dt_max=self.dt_max / lam, t_max=self.t_max / lam,
                       threshold=self.threshold * lam ** beta)


@dataclass(frozen=True)
class CauchyState:
    field: GridField
    t: float
    p: float
    controls: StepControls = StepControls()

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not np.all(np.isfinite(self.field.values)):
            raise ValueError("state values must be finite")

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.field.values)))

    def max_dt(self) -> float:
        u = self.sup_norm
        if u == 0 or not self.controls.nonlinear:
            return self.controls.dt_max
        return min(self.controls.dt_max, self.controls.safety * u ** (1.0 - self.p))


def _nonlinearity(u: np.ndarray, p: float) -> np.ndarray:
    if p == 2.0:
        return np.abs(u) * u
    if p == 3.0:
        return u * u * u
    return np.abs(u) ** (p - 1.0) * u


def _multipliers(g: GridField, dt: float):
    k = g.wavenumber_modulus()
    z = dt * k
    E = np.exp(-z)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi1 = np.where(z > 1e-8, -np.expm1(-z) / np.where(z > 1e-8, z, 1.0), 1.0 - 0.5 * z)
    return E, phi1


def step(state: CauchyState, dt: float) -> CauchyState:
    """One ETD1 step; raises :class:`BlowupOverflow` on non-finite output."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if dt > state.max_dt() * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the nonlinear step bound {state.max_dt()}")
    g = state.field
    axes = tuple(range(g.dim))
    shape = g.values.shape
    E, phi1 = _multipliers(g, dt)
    uh = np.fft.rfftn(g.values, axes=axes)
    out = E * uh
    if state.controls.nonlinear:
        nh = np.fft.rfftn(_nonlinearity(g.values, state.p), axes=axes)
        if state.controls.dealias and float(state.p).is_integer():
            k = g.wavenumber_modulus()
            kmax = math.pi / g.h
            nh = np.where(k <= (2.0 / 3.0) * kmax, nh, 0.0)
        out = out + dt * phi1 * nh
    u = np.fft.irfftn(out, s=shape, axes=axes)
    if not np.all(np.isfinite(u)):
        raise BlowupOverflow(f"non-finite values at t={state.t + dt}")
    return CauchyState(g.with_values(u), state.t + dt, state.p, state.controls)


# ---------------------------------------------------------------------------
# rate fit


@dataclass(frozen=True)
class RateFit:
    T_est: float
    beta_fit: float
    amplitude_limit: float
    residual: float
    decades: float


def estimate_blowup_time(times, sup_norms, p: float, min_norm: Optional[float] = None) -> float:
    """Root of the least-squares line through ||u||^{1-p} against t.

    Only the final phase (||u|| >= min_norm, by default two decades below
    the last norm) is used, and residuals are weighted relatively so the
    latest samples, where dissipation matters least, dominate.
    """
    t = np.asarray(times, dtype=float)
    m = np.asarray(sup_norms, dtype=float)
    if min_norm is None:
        min_norm = max(m[-1] * 1e-2, m[0])
    sel = m >= min_norm
    if np.count_nonzero(sel) < 3:
        raise FitError("too few samples in the final phase to estimate the blow-up time")
    x = t[sel]
    z = m[sel] ** (1.0 - p)
    slope, icpt = np.polyfit(x - x[-1], z, 1, w=1.0 / z)
    if not slope < 0:
        raise FitError("||u||^{1-p} is not decreasing: no blow-up trend")
    return float(x[-1] - icpt / slope)


def rate_fit(times, sup_norms, p: float, T_est: Optional[float] = None, decades: float = 2.0) -> RateFit:
    """Fit ||u(t)|| ~ A (T - t)^{-beta_fit} over the final ``decades`` of T - t.

    ``amplitude_limit`` is the median of (T - t)^beta ||u|| with beta = 1/(p-1)
    over the final decade.
    """
    t = np.asarray(times, dtype=float)
    m = np.asarray(sup_norms, dtype=float)
    if t.shape != m.shape or t.size < 3:
        raise FitError("need matching time and norm series of at least 3 samples")
    if T_est is None:
        T_est = estimate_blowup_time(t, m, p)
    tau = T_est - t
    ok = tau > 0
    if np.count_nonzero(ok) < 3:
        raise FitError("fewer than 3 samples before the estimated blow-up time")
    tau, m = tau[ok], m[ok]
    tmin = float(np.min(tau))
    span = math.log10(float(np.max(tau)) / tmin)
    if span < decades:
        raise FitError(f"series covers {span:.2f} decades of T - t; {decades} required")
    win = tau <= tmin * 10.0 ** decades
    lx, ly = np.log(tau[win]), np.log(m[win])
    lx0 = float(np.mean(lx))
    coef = np.polyfit(lx - lx0, ly, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, lx - lx0) - ly) ** 2)))
    beta = 1.0 / (p - 1.0)
    last = tau <= tmin * 10.0
    amp = float(np.median(tau[last] ** beta * m[last]))
    return RateFit(T_est=float(T_est), beta_fit=float(-coef[0]), amplitude_limit=amp, residual=resid,
                   decades=span)


# ---------------------------------------------------------------------------
# the simulation driver


@dataclass
class SimulationResult:
    times: np.ndarray
    sup_norms: np.ndarray
    mass_tail: np.ndarray
    snapshots: list  # of CauchyState
    final: CauchyState
    blew_up: bool
    T_est: Optional[float]
    contaminated: bool
    steps: int
    reason: str = ""

    def rows(self):
        for t, m, c in zip(self.times, self.sup_norms, self.mass_tail):
            yield {"t": float(t), "sup_norm": float(m), "mass_tail": float(c)}


def _tail_fraction(g: GridField) -> float:
    """Share of the L^1 mass within L/4 of the box boundary."""
    absu = np.abs(g.values)
    total = float(np.sum(absu))
    if total == 0:
        return 0.0
    masks = [np.abs(x) >= 0.75 * g.L for x in g.mesh()]
    near = np.logical_or.reduce(masks)
    return float(np.sum(absu[near])) / total


def simulate_to_blowup(u0: GridField, p: float, controls: StepControls = StepControls()) -> SimulationResult:
    """Evolve until ||u|| exceeds ``controls.threshold`` or t reaches t_max.

    Steps are ``min(dt_max, safety ||u||^{1-p})``. Snapshots are kept at the
    start, each time ||u|| has changed by the factor ``snapshot_growth``
    since the previous one, and at the end.
    """
    state = CauchyState(u0, 0.0, p, controls)
    times, norms, tails = [0.0], [state.sup_norm], [_tail_fraction(u0)]
    snaps = [state]
    last_snap = max(state.sup_norm, 1e-300)
    g = controls.snapshot_growth
    blew_up = False
    reason = "t_max reached"
    steps = 0
    while state.t < controls.t_max:
        if steps >= controls.max_steps:
            reason = "step limit reached"
            break
        dt = min(state.max_dt(), controls.t_max - state.t)
        try:
            state = step(state, dt)
        except BlowupOverflow:
            blew_up = True
            reason = "overflow"
            break
        steps += 1
        m = state.sup_norm
        times.append(state.t)
        norms.append(m)
        tails.append(_tail_fraction(state.field))
        if m >= last_snap * g or m <= last_snap / g:
            snaps.append(state)
            last_snap = max(m, 1e-300)
        if m >= controls.threshold:
            blew_up = True
            reason = "threshold exceeded"
            break
    if snaps[-1] is not state:
        snaps.append(state)
    times = np.array(times)
    norms = np.array(norms)
    tails = np.array(tails)
    T_est = None
    if blew_up:
        try:
            T_est = estimate_blowup_time(times, norms, p)
        except FitError:
            T_est = None
    return SimulationResult(times=times, sup_norms=norms, mass_tail=tails, snapshots=snaps, final=state,
                            blew_up=blew_up, T_est=T_est, contaminated=bool(np.max(tails) > 0.01),
                            steps=steps, reason=reason)


# ---------------------------------------------------------------------------
# similarity variables


@dataclass(frozen=True)
class SelfSimilarState:
    """w(y, s) = tau^beta u(x0 + tau y, T - tau), s = -ln tau, at nodes y.

    ``drift`` holds w_s + y . grad w = tau^{beta+1} u_t - beta w, and
    ``half_lap`` the half-Laplacian of w in y, both at the same nodes.
    """

    w: SampledField
    drift: np.ndarray
    half_lap: np.ndarray
    s: float
    T_est: float
    tau: float
    x0: float
    p: float

    def trace_sample(self) -> TraceSample:
        return TraceSample(self.s, self.w, self.drift)


def _spectral_eval(g: GridField, x: np.ndarray, coeff_mult=None) -> np.ndarray:
    """Evaluate the trigonometric interpolant of g (optionally with a multiplier) at x."""
    N = g.N
    uh = np.fft.fft(g.values)
    k = 2.0 * np.pi * np.fft.fftfreq(N, d=g.h)
    if coeff_mult is not None:
        uh = uh * coeff_mult(k)
    # the Nyquist mode is split symmetrically to keep the interpolant real
    if N % 2 == 0:
        nyq = N // 2
        uh = uh.copy()
        half = 0.5 * uh[nyq]
        uh[nyq] = half
        uh = np.append(uh, half)
        k = np.append(k, -k[nyq])
    phase = np.exp(1j * np.outer(np.asarray(x) + g.L, k))
    return (phase @ uh).real / N


def to_self_similar(state: CauchyState, T_est: float, x0: float = 0.0, y=None,
                    step: float = 0.05) -> SelfSimilarState:
    """Similarity variables at the time of ``state``.

    Without explicit nodes ``y`` the whole periodic box is covered by
    sinh-spaced nodes; outside the box w is continued by its boundary value
    when energies are computed.
    """
    g = state.field
    if g.dim != 1:
        raise ValueError("similarity variables are implemented for n = 1")
    tau = T_est - state.t
    if not tau > 0:
        raise ValueError(f"state time {state.t} is not before T_est={T_est}")
    p = state.p
    beta = 1.0 / (p - 1.0)
    lo, hi = (-g.L - x0) / tau, (g.L - x0) / tau
    if y is None:
        ys, wts = SampledField.sinh_nodes(lo, hi, 1.0, step)
    else:
        ys = np.asarray(y, dtype=float)
        wts = np.gradient(ys) if ys.size > 1 else np.ones(1)
    x = x0 + tau * ys
    u = _spectral_eval(g, x)
    ux = _spectral_eval(g, x, lambda k: 1j * k)
    hl_u = _spectral_eval(g, x, lambda k: np.abs(k))
    ut = -hl_u + _nonlinearity(u, p)
    w = tau ** beta * u
    dw = tau ** (beta + 1.0) * ux
    drift = tau ** (beta + 1.0) * ut - beta * w
    if y is None:
        # both ends are the same point of the periodic box
        sf = SampledField(ys, w, dw, wts, outside=0.5 * float(w[0] + w[-1]))
    else:
        sf = SampledField(ys, w, dw, wts)
    return SelfSimilarState(w=sf, drift=drift, half_lap=tau ** (beta + 1.0) * hl_u, s=-math.log(tau),
                            T_est=float(T_est), tau=tau, x0=float(x0), p=p)


def similarity_trace(result: SimulationResult, T: Optional[float] = None, x0: Optional[float] = None,
                     min_tau: Optional[float] = None, min_cover: float = 50.0, step: float = 0.05) -> list:
    """Snapshots of a run in similarity variables, restricted to resolved times.

    ``T`` defaults to the estimated blow-up time, or t_end + 1 when the run
    did not blow up. ``x0`` defaults to the location of the final maximum of
    |u|. Snapshots with T - t < ``min_tau`` (default 4 h^2, below which the
    peak, of width ~ sqrt(T - t), is no longer resolved by the grid) are
    dropped, and so are snapshots where the box covers less than
    |y| <= ``min_cover``, since the weighted integrals then depend mostly
    on how w is continued outside the box.
    """
    fin = result.final
    g = fin.field
    if g.dim != 1:
        raise ValueError("similarity variables are implemented for n = 1")
    if T is None:
        T = result.T_est if (result.blew_up and result.T_est is not None) else fin.t + 1.0
    if x0 is None:
        x0 = float(g.axis()[int(np.argmax(np.abs(g.values)))])
    if min_tau is None:
        min_tau = 4.0 * g.h * g.h
    out = []
    for st in result.snapshots:
        tau = T - st.t
        cover = (g.L - abs(x0)) / tau if tau > 0 else 0.0
        if tau >= min_tau and cover >= min_cover:
            out.append(to_self_similar(st, T, x0, step=step))
    return out


def terminal_amplitude(result: SimulationResult, T: float, x0: float) -> float:
    """(T - t)^beta |u(x0, t)| at the last state."""
    fin = result.final
    beta = 1.0 / (fin.p - 1.0)
    u = float(_spectral_eval(fin.field, np.array([x0]))[0])
    return (T - fin.t) ** beta * abs(u)


def from_self_similar(ss: SelfSimilarState, x) -> np.ndarray:
    """u at physical points x, by linear interpolation of w in y."""
    beta = 1.0 / (ss.p - 1.0)
    y = (np.asarray(x, dtype=float) - ss.x0) / ss.tau
    return ss.tau ** (-beta) * np.interp(y, ss.w.y, ss.w.values)


def self_similar_residual(a: SelfSimilarState, b: SelfSimilarState, c: float = 1.0) -> float:
    """Max over |y| <= c of |w_s + (-Delta)^{1/2} w + y.grad w + beta w - |w|^{p-1} w|.

    w_s is the difference quotient between two states on the same nodes and
    the remaining terms are averaged between them, so the residual is a
    genuine consistency check that decreases as the sampling refines.
    """
    if a.w.y.shape != b.w.y.shape or np.max(np.abs(a.w.y - b.w.y)) > 0:
        raise ValueError("states must share the same y nodes")
    ds = b.s - a.s
    if not ds > 0:
        raise ValueError("states must be ordered in s")
    beta = 1.0 / (a.p - 1.0)

    def rhs(st):
        w = st.w.values
        return st.half_lap + st.w.y * st.w.dvalues + beta * w - _nonlinearity(w, st.p)

    ws = (b.w.values - a.w.values) / ds
    res = ws + 0.5 * (rhs(a) + rhs(b))
    mask = np.abs(a.w.y) <= c
    return float(np.max(np.abs(res[mask])))


# ---------------------------------------------------------------------------
# steady profiles and the limit classification


def stationary_residual(w: ProfileField, p: Optional[float] = None, n: Optional[int] = None,
                        spec: QuadSpec = DEFAULT_SPEC, radii: Optional[Sequence[float]] = None) -> float:
    """sup over sample radii of |(-Delta)^{1/2} w + y.grad w + beta w - |w|^{p-1} w|.

    The half-Laplacian is the PV quadrature, so this is independent of the
    spectral machinery used by the simulator.
    """
    p = w.p if p is None else p
    n = w.dim if n is None else n
    if not isinstance(w.w, RadialProfile):
        raise ValueError("stationary residuals are evaluated for radial closed-form profiles")
    prof = w.w
    beta = 1.0 / (p - 1.0)
    if radii is None:
        radii = np.concatenate([[0.0], np.geomspace(1e-2, 1e2, 40)])
    worst = 0.0
    for r in radii:
        r = float(r)
        hl = half_laplacian_pv(prof, r, spec).value
        val = float(prof(np.array(r)))
        ydw = float(prof.y_dot_grad(np.array(r))) if prof.derivative is not None else 0.0
        worst = max(worst, abs(hl + ydw + beta * val - abs(val) ** (p - 1.0) * val))
    return worst


class LimitProfile(str, enum.Enum):
    ZERO = "ZERO"
    PLUS = "PLUS"
    MINUS = "MINUS"
    UNDETERMINED = "UNDETERMINED"


def limit_profile_classify(trace, p: float, c: float = 1.0, rel: float = 0.1) -> LimitProfile:
    """Classify the terminal w on |y| <= c against 0 and +-beta^beta.

    ``trace`` is a sequence of :class:`SelfSimilarState` (or a single one).
    A basin is chosen when every value on |y| <= c lies within
    ``rel * beta^beta`` of it; otherwise the answer is UNDETERMINED.
    """
    last = trace if isinstance(trace, SelfSimilarState) else trace[-1]
    beta = 1.0 / (p - 1.0)
    target = beta ** beta
    mask = np.abs(last.w.y) <= c
    vals = last.w.values[mask]
    if vals.size == 0 or not np.all(np.isfinite(vals)):
        return LimitProfile.UNDETERMINED
    tol = rel * target
    if np.max(np.abs(vals)) <= tol:
        return LimitProfile.ZERO
    if np.max(np.abs(vals - target)) <= tol:
        return LimitProfile.PLUS
    if np.max(np.abs(vals + target)) <= tol:
        return LimitProfile.MINUS
    return LimitProfile.UNDETERMINED
