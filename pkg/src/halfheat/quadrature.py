"""Adaptive quadrature for the singular integrals of the half-Laplacian.

Three tools live here:

* :func:`adaptive_1d` -- globally adaptive Gauss-Kronrod (7/15) on finite or
  semi-infinite intervals, with a deterministic work queue.
* :func:`radial_pair_integral` and :func:`radial_kernel_integral` -- two
  independent reductions of integrals over ``y'`` in R^n whose integrand
  depends on ``|y'|``, the angle to a fixed ``y`` and ``|y' - y|``.
* :func:`sup_search_radial` -- supremum of a function of ``r`` over the
  closed half line ``[0, inf]``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.special import gamma, hyp2f1

__all__ = [
    "AT_INFINITY",
    "IntegralResult",
    "QuadSpec",
    "QuadratureError",
    "SupremumError",
    "SupResult",
    "adaptive_1d",
    "angular_kernel",
    "radial_kernel_integral",
    "radial_pair_integral",
    "sphere_area",
    "sup_search_radial",
]

AT_INFINITY = math.inf

# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# full 15-point node set on [-1, 1], ordered left to right
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KWEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GWEIGHTS = np.zeros(15)
_GWEIGHTS[1:14:2] = np.concatenate([_WG[:-1], _WG[::-1]])

_EPS = np.finfo(float).eps
_SUPPORTED_ORDERS = (15,)


class QuadratureError(RuntimeError):
    """Raised when an integral is required to converge and did not.

    The best available estimate is kept on ``result``.
    """

    def __init__(self, message: str, result: "IntegralResult | None" = None):
        super().__init__(message)
        self.result = result


class SupremumError(ArithmeticError):
    """The supremum is not finite (for instance a divergent asymptote)."""


@dataclass(frozen=True)
class QuadSpec:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_subdivisions: int = 100_000
    near_diagonal_radius: float = 1e-3
    tail_cutoff: float = 1e4
    order: int = 15

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "near_diagonal_radius", "tail_cutoff"):
            if not getattr(self, name) > 0:
                raise ValueError(f"QuadSpec.{name} must be positive")
        if not self.rel_tol < 1:
            raise ValueError("QuadSpec.rel_tol must be < 1")
        if self.max_subdivisions < 1:
            raise ValueError("QuadSpec.max_subdivisions must be positive")
        if self.order not in _SUPPORTED_ORDERS:
            raise ValueError(f"panel rule order must be one of {_SUPPORTED_ORDERS}")

    def tolerance(self, value: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(value))

    def tightened(self, factor: float) -> "QuadSpec":
        """Same spec with both tolerances divided by ``factor``."""
        return QuadSpec(
            rel_tol=self.rel_tol / factor,
            abs_tol=self.abs_tol / factor,
            max_subdivisions=self.max_subdivisions,
            near_diagonal_radius=self.near_diagonal_radius,
            tail_cutoff=self.tail_cutoff,
            order=self.order,
        )


DEFAULT_SPEC = QuadSpec()


@dataclass(frozen=True)
class IntegralResult:
    value: float
    err_est: float
    evaluations: int
    converged: bool

    def __post_init__(self):
        if not self.err_est >= 0:
            raise ValueError("err_est must be non-negative")

    def require(self, what: str = "integral") -> "IntegralResult":
        if not self.converged:
            raise QuadratureError(
                f"{what} did not converge: value={self.value!r}, err_est={self.err_est!r}",
                self,
            )
        return self

    def __add__(self, other: "IntegralResult") -> "IntegralResult":
        return IntegralResult(
            self.value + other.value,
            self.err_est + other.err_est,
            self.evaluations + other.evaluations,
            self.converged and other.converged,
        )

    def scaled(self, factor: float) -> "IntegralResult":
        return IntegralResult(
            factor * self.value, abs(factor) * self.err_est, self.evaluations, self.converged
        )


# ---------------------------------------------------------------------------
# one-dimensional adaptive Gauss-Kronrod


def _make_map(a: float, b: float):
    """Return (g, lo, hi) so that int_a^b f = int_lo^hi f(x(t)) x'(t) dt."""
    if math.isfinite(a) and math.isfinite(b):
        return None, a, b
    if math.isfinite(a) and b == math.inf:
        def g(t):
            d = 1.0 - t
            return a + t / d, 1.0 / (d * d)
        return g, 0.0, 1.0
    if a == -math.inf and math.isfinite(b):
        def g(t):
            d = 1.0 - t
            return b - t / d, 1.0 / (d * d)
        return g, 0.0, 1.0
    if a == -math.inf and b == math.inf:
        def g(t):
            d = 1.0 - t * t
            return t / d, (1.0 + t * t) / (d * d)
        return g, -1.0, 1.0
    raise ValueError(f"unsupported integration interval ({a}, {b})")


def _inverse_map(a: float, b: float, x: float) -> float:
    if math.isfinite(a) and math.isfinite(b):
        return x
    if math.isfinite(a):
        d = x - a
        return d / (1.0 + d)
    if math.isfinite(b):
        d = b - x
        return d / (1.0 + d)
    if x == 0.0:
        return 0.0
    return (math.sqrt(1.0 + 4.0 * x * x) - 1.0) / (2.0 * x)


def _panels(f, lefts: np.ndarray, rights: np.ndarray, mapping):
    """Apply the 15-point rule to several panels at once."""
    half = 0.5 * (rights - lefts)
    mid = 0.5 * (rights + lefts)
    t = mid[:, None] + half[:, None] * _NODES[None, :]
    if mapping is None:
        vals = np.asarray(f(t.ravel()), dtype=float).reshape(t.shape)
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            x, jac = mapping(t)
        # rounding can put a node on the mapped endpoint; the integrand of
        # a convergent integral contributes nothing there
        at_end = ~np.isfinite(x) | ~np.isfinite(jac)
        if np.any(at_end):
            x = np.where(at_end, 0.0, x)
            jac = np.where(at_end, 0.0, jac)
        vals = np.asarray(f(x.ravel()), dtype=float).reshape(t.shape) * jac
    resk = vals @ _KWEIGHTS
    resg = vals @ _GWEIGHTS
    reskh = 0.5 * resk
    resasc = np.abs(vals - reskh[:, None]) @ _KWEIGHTS
    resabs = np.abs(vals) @ _KWEIGHTS
    ah = np.abs(half)
    value = resk * half
    err = np.abs((resk - resg) * half)
    resasc *= ah
    resabs *= ah
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc != 0.0) & (err != 0.0), scaled, err)
    err = np.where(resabs > np.finfo(float).tiny / (50 * _EPS),
                   np.maximum(50 * _EPS * resabs, err), err)
    if not np.all(np.isfinite(value)):
        err = np.where(np.isfinite(value), err, np.inf)
    return value, err


def adaptive_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    spec: QuadSpec = DEFAULT_SPEC,
    points: Sequence[float] = (),
) -> IntegralResult:
    """Integrate ``f`` over ``(a, b)``; ``b`` (or ``a``) may be infinite.

    ``f`` must accept and return numpy arrays. ``points`` are interior
    breakpoints (kinks, near-singular spots) used to seed the subdivision.
    Exhausting ``max_subdivisions`` is reported through ``converged=False``.
    """
    a = float(a)
    b = float(b)
    if a == b:
        return IntegralResult(0.0, 0.0, 0, True)
    if a > b:
        res = adaptive_1d(f, b, a, spec, points)
        return res.scaled(-1.0)
    mapping, lo, hi = _make_map(a, b)
    cuts = sorted({_inverse_map(a, b, float(p)) for p in points if a < p < b})
    edges = np.array([lo, *cuts, hi])
    lefts, rights = edges[:-1], edges[1:]
    vals, errs = _panels(f, lefts, rights, mapping)
    evaluations = 15 * len(lefts)

    # deterministic work queue: worst error first, ties by creation order
    store: dict[int, tuple[float, float, float, float]] = {}
    heap: list[tuple[float, int]] = []
    frozen: list[int] = []
    counter = 0
    for lft, rgt, v, e in zip(lefts, rights, vals, errs):
        store[counter] = (lft, rgt, v, e)
        heapq.heappush(heap, (-e, counter))
        counter += 1
    total = math.fsum(vals)
    total_err = math.fsum(errs)
    since_resum = 0

    while total_err > spec.tolerance(total) and heap:
        if len(store) >= spec.max_subdivisions:
            break
        _, key = heapq.heappop(heap)
        lft, rgt, v, e = store[key]
        mid = 0.5 * (lft + rgt)
        if not (lft < mid < rgt) or (rgt - lft) <= 4 * _EPS * max(abs(lft), abs(rgt), 1e-300):
            # cannot be split any further; keep it out of the queue
            frozen.append(key)
            continue
        del store[key]
        cv, ce = _panels(f, np.array([lft, mid]), np.array([mid, rgt]), mapping)
        evaluations += 30
        for cl, cr, vv, ee in ((lft, mid, cv[0], ce[0]), (mid, rgt, cv[1], ce[1])):
            store[counter] = (cl, cr, vv, ee)
            heapq.heappush(heap, (-ee, counter))
            counter += 1
        total += cv[0] + cv[1] - v
        total_err += ce[0] + ce[1] - e
        since_resum += 1
        if since_resum >= 64:
            items = sorted(store.values())
            total = math.fsum(it[2] for it in items)
            total_err = math.fsum(it[3] for it in items)
            since_resum = 0

    items = sorted(store.values())
    value = math.fsum(it[2] for it in items)
    err = math.fsum(it[3] for it in items)
    if not math.isfinite(value):
        return IntegralResult(value, math.inf, evaluations, False)
    converged = err <= spec.tolerance(value)
    return IntegralResult(value, err, evaluations, converged)


# ---------------------------------------------------------------------------
# radial reductions


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^{n-1} in R^n (2 for n = 1)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def angular_kernel(n: int, r, rp, alpha: float = 0.5, gap=None):
    """``(r - rp)^2`` times the spherical integral of ``|y' - y|^{-n-2 alpha}``.

    The spherical integral runs over ``|y'| = rp`` (with the ``rp^{n-1}``
    Jacobian removed), ``|y| = r``. It equals
    ``|S^{n-1}| r_>^{-n-2a} (1 - t^2)^{-1-2a} 2F1(-a, n/2 - 1 - a; n/2; t^2)``
    with ``t = r_< / r_>``; the returned product is regular at ``rp = r``
    apart from the factor ``|r - rp|^{1 - 2a}``. ``gap`` may supply
    ``|r - rp|`` when it is known more accurately than the difference.
    """
    r = np.asarray(r, dtype=float)
    rp = np.asarray(rp, dtype=float)
    big = np.maximum(r, rp)
    small = np.minimum(r, rp)
    with np.errstate(divide="ignore", invalid="ignore"):
        t2 = np.where(big > 0, (small / big) ** 2, 0.0)
        hyp = hyp2f1(-alpha, n / 2.0 - 1.0 - alpha, n / 2.0, t2)
        gap = np.abs(r - rp) if gap is None else np.asarray(gap, dtype=float)
        out = (
            sphere_area(n)
            * big ** (2.0 * alpha + 2.0 - n)
            * hyp
            * gap ** (1.0 - 2.0 * alpha)
            / (big + small) ** (1.0 + 2.0 * alpha)
        )
    if alpha > 0.5:
        # integrable |r - rp|^{1 - 2a} blow-up; a node landing on the
        # diagonal through rounding is a null set
        out = np.where(gap == 0, 0.0, out)
    return out


def radial_kernel_integral(
    q: Callable[[np.ndarray], np.ndarray],
    n: int,
    domain: str,
    r: float,
    spec: QuadSpec = DEFAULT_SPEC,
    alpha: float = 0.5,
) -> IntegralResult:
    """Integral of ``q(|y'|) (|y'| - |y|)^2 |y' - y|^{-n-2 alpha}`` over y'.

    ``q`` is a function of ``|y'|`` only; callers fold difference quotients
    into it so that the diagonal cancellation is done analytically. The
    angular integral is evaluated in closed form by :func:`angular_kernel`.
    ``domain`` is one of ``inside_r``, ``outside_r`` or ``all``.
    """
    _check_domain(domain)
    r = float(r)

    def integrand(rp, gap=None):
        return q(rp) * rp ** (n - 1) * angular_kernel(n, r, rp, alpha, gap)

    # features of q near the origin are narrow compared with [0, r] when r
    # is large; geometric breakpoints keep the subdivision from skipping them
    inner_pts = []
    b = 1.0
    while b < 0.5 * r:
        inner_pts.append(b)
        b *= 4.0
    if r > 0:
        inner_pts.append(0.5 * r)

    pieces = []
    if alpha > 0.5:
        # |r - rp|^{1 - 2a} endpoint singularity: gap = width * w^m makes the
        # integrand vanish linearly in w
        m = 1.0 / (1.0 - alpha)

        def graded(sign, width):
            def h(w):
                gap = width * w**m
                return integrand(r + sign * gap, gap) * width * m * w ** (m - 1.0)
            return h

        if domain in ("inside_r", "all") and r > 0:
            wpts = sorted(((r - x) / r) ** (1.0 / m) for x in inner_pts)
            pieces.append(adaptive_1d(graded(-1.0, r), 0.0, 1.0, spec, points=wpts))
        if domain in ("outside_r", "all"):
            pieces.append(adaptive_1d(graded(1.0, r + 1.0), 0.0, 1.0, spec))
            pieces.append(adaptive_1d(integrand, 2.0 * r + 1.0, math.inf, spec))
        return _sum_results(pieces)
    if domain in ("inside_r", "all") and r > 0:
        pieces.append(adaptive_1d(integrand, 0.0, r, spec, points=inner_pts))
    if domain in ("outside_r", "all"):
        pieces.append(adaptive_1d(integrand, r, math.inf, spec, points=(2.0 * r + 1.0,)))
    return _sum_results(pieces)


def _sum_results(pieces) -> IntegralResult:
    if not pieces:
        return IntegralResult(0.0, 0.0, 0, True)
    res = pieces[0]
    for extra in pieces[1:]:
        res = res + extra
    return res


def _check_domain(domain: str):
    if domain not in ("inside_r", "outside_r", "all"):
        raise ValueError(f"unknown domain {domain!r}; use inside_r, outside_r or all")


def radial_pair_integral(
    g: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray],
    n: int,
    domain: str,
    r: float,
    spec: QuadSpec = DEFAULT_SPEC,
) -> IntegralResult:
    """Integral over y' of ``g(|y'|, cos theta, |y' - y|)``, theta = angle(y', y).

    ``|y| = r``. The integral is written in spherical coordinates centred at
    ``y`` itself, ``y' = y + s omega``, so the Jacobian ``s^{n-1}`` absorbs a
    diagonal singularity of strength ``|y' - y|^{1-n}``. In these
    coordinates the ball ``|y'| < r`` is ``{cos phi < 0, s < -2 r cos phi}``.
    """
    _check_domain(domain)
    r = float(r)
    if r < 0:
        raise ValueError("r must be non-negative")
    if domain == "inside_r" and r == 0:
        return IntegralResult(0.0, 0.0, 0, True)
    inner_spec = spec.tightened(10.0)

    if n == 1:
        # y' = r + sigma * s, sigma = +-1
        def branch(sigma):
            def h(s):
                yp = r + sigma * s
                rp = np.abs(yp)
                c = np.where(yp * (r if r > 0 else 1.0) >= 0, 1.0, -1.0)
                return g(rp, c, s)
            return h

        pieces = []
        if domain in ("outside_r", "all"):
            pieces.append(adaptive_1d(branch(1.0), 0.0, math.inf, spec))
        if domain == "all":
            pieces.append(adaptive_1d(branch(-1.0), 0.0, math.inf, spec, points=(r, 2 * r) if r > 0 else ()))
        elif domain == "outside_r":
            pieces.append(adaptive_1d(branch(-1.0), 2 * r, math.inf, spec))
        else:
            pieces.append(adaptive_1d(branch(-1.0), 0.0, 2 * r, spec, points=(r,)))
        res = pieces[0]
        for extra in pieces[1:]:
            res = res + extra
        return res

    s_weight = sphere_area(n - 1)
    worst_inner = [0.0]
    inner_evals = [0]
    inner_ok = [True]

    def radial_line(phi: float):
        cphi = math.cos(phi)

        def h(s):
            rp2 = r * r + s * s + 2.0 * r * s * cphi
            rp = np.sqrt(np.maximum(rp2, 0.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                c = np.where(rp > 0, (r + s * cphi) / rp, 1.0)
            return g(rp, c, s) * s ** (n - 1)

        if domain == "inside_r":
            lo, hi = 0.0, max(-2.0 * r * cphi, 0.0)
        elif domain == "outside_r":
            lo, hi = (max(-2.0 * r * cphi, 0.0), math.inf)
        else:
            lo, hi = 0.0, math.inf
        bps = (r,) if (domain == "all" and cphi < 0 and r > 0) else ()
        res = adaptive_1d(h, lo, hi, inner_spec, points=bps)
        worst_inner[0] = max(worst_inner[0], res.err_est)
        inner_evals[0] += res.evaluations
        inner_ok[0] = inner_ok[0] and res.converged
        return res.value

    def outer(phis):
        return np.array([radial_line(float(p)) for p in phis]) * np.sin(phis) ** (n - 2)

    if domain == "inside_r":
        res = adaptive_1d(outer, 0.5 * math.pi, math.pi, spec)
        span = 0.5 * math.pi
    else:
        res = adaptive_1d(outer, 0.0, math.pi, spec, points=(0.5 * math.pi,))
        span = math.pi
    err = s_weight * (res.err_est + span * worst_inner[0])
    value = s_weight * res.value
    converged = res.converged and inner_ok[0] and err <= 10 * spec.tolerance(value)
    return IntegralResult(value, err, res.evaluations + inner_evals[0], converged)


# ---------------------------------------------------------------------------
# supremum over r in [0, inf]


class SupResult(NamedTuple):
    sup_value: float
    argsup: float
    err_est: float

    @property
    def attained(self) -> bool:
        """False when the supremum is only reached as r -> infinity."""
        return self.argsup != AT_INFINITY


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _value_and_err(out) -> tuple[float, float]:
    if isinstance(out, IntegralResult):
        return out.value, out.err_est
    return float(out), 0.0


def _estimate_limit(f) -> tuple[float, float]:
    rs = (1e4, 1e5, 1e6)
    vals = [_value_and_err(f(x)) for x in rs]
    (f1, _), (f2, _), (f3, e3) = vals
    # f(r) ~ L + C / r
    lim = (rs[2] * f3 - rs[1] * f2) / (rs[2] - rs[1])
    err = abs(lim - f3) + e3 + abs((rs[1] * f2 - rs[0] * f1) / (rs[1] - rs[0]) - lim)
    return lim, err


def sup_search_radial(
    f: Callable[[float], "float | IntegralResult"],
    spec: QuadSpec = DEFAULT_SPEC,
    *,
    limit: "float | None" = None,
    n_scan: int = 65,
    phi_tol: float = 1e-10,
) -> SupResult:
    """Supremum of ``f`` over ``r`` in ``[0, inf]``.

    The half line is compactified by ``r = tan(phi)``. A uniform scan in
    ``phi`` locates the best bracket, which golden-section search refines.
    The value at ``phi = pi/2`` is ``limit`` when given, otherwise it is
    extrapolated from ``f`` at large ``r``. When the limit beats every
    finite sample the result carries ``argsup = AT_INFINITY``.
    ``f`` may return floats or :class:`IntegralResult`.
    """
    if limit is None:
        lim, lim_err = _estimate_limit(f)
    else:
        lim, lim_err = float(limit), 0.0
    if not math.isfinite(lim):
        raise SupremumError(f"asymptote of the function is not finite ({lim})")

    phis = np.linspace(0.0, 0.5 * math.pi, n_scan)[:-1]
    samples = []
    for phi in phis:
        v, e = _value_and_err(f(math.tan(phi)))
        if not math.isfinite(v):
            raise SupremumError(f"non-finite value {v} at r={math.tan(phi)}")
        samples.append((v, e))
    vals = np.array([s[0] for s in samples])
    k = int(np.argmax(vals))  # first occurrence: smallest argsup on ties
    best_v, best_e = samples[k]
    if lim > best_v:
        # still check the last bracket near infinity for an overshoot
        k = len(phis) - 1

    lo = phis[max(k - 1, 0)]
    hi = phis[k + 1] if k + 1 < len(phis) else 0.5 * math.pi * (1 - 1e-12)

    def fphi(phi):
        return _value_and_err(f(math.tan(phi)))

    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, ec = fphi(c)
    fd, ed = fphi(d)
    while hi - lo > phi_tol:
        if fc >= fd:
            hi, d, fd, ed = d, c, fc, ec
            c = hi - _INV_PHI * (hi - lo)
            fc, ec = fphi(c)
        else:
            lo, c, fc, ec = c, d, fd, ed
            d = lo + _INV_PHI * (hi - lo)
            fd, ed = fphi(d)
    if fc >= fd:
        g_phi, g_v, g_e = c, fc, ec
    else:
        g_phi, g_v, g_e = d, fd, ed
    bracket_err = abs(fc - fd)

    candidates = [(best_v, float(phis[int(np.argmax(vals))]), best_e), (g_v, g_phi, g_e + bracket_err)]
    cand = max(candidates, key=lambda c_: (c_[0], -c_[1]))
    # a finite candidate that beats the limit by less than its own error is noise
    if lim >= cand[0] - max(cand[2], spec.tolerance(cand[0])):
        return SupResult(lim, AT_INFINITY, lim_err + max(0.0, g_e))
    v, phi, e = cand
    argsup = 0.0 if phi == 0.0 else math.tan(phi)
    return SupResult(v, argsup, e)
