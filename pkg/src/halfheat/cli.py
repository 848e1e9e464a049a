"""Command-line entry point.

Exit codes: 0 ok, 1 usage error, 2 numerical non-convergence (or a failed
verification suite), 3 rate-fit failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .dynamics import (
    FitError,
    StepControls,
    limit_profile_classify,
    rate_fit,
    similarity_trace,
    simulate_to_blowup,
    terminal_amplitude,
    to_self_similar,
)
from .energy import ProfileField, energy, epsilon_band, monotonicity_defect, pohozaev_residuals
from .kernel import GridField, eta_bound_ratio, kernel_identity_residuals
from .mn import compute_Mn, compute_Mn_alpha, p_star
from .profiles import MAX_DIM, check_dimension, constant_profile, q_n, rho
from .quadrature import QuadSpec, QuadratureError, SupremumError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_FIT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x) -> str:
    """17 significant digits; None becomes an empty field."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return None
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def config_echo(args: argparse.Namespace) -> str:
    """Plain-text, order-stable rendering of the parsed flags."""
    items = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return f"halfheat {__version__} " + " ".join(f"{k}={v}" for k, v in items.items())


def _write_json(obj: dict, path: Optional[str]) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _write_csv(rows: list[dict], columns: list[str], path: Optional[str], config: str) -> None:
    buf = io.StringIO()
    buf.write(f"# {config}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    if path is None or path == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())


def _spec(args) -> QuadSpec:
    tol = getattr(args, "tol", None)
    return QuadSpec() if tol is None else QuadSpec(rel_tol=tol, abs_tol=min(1e-10, tol * 1e-2))


def _dimension(n) -> int:
    try:
        return check_dimension(n)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------------------
# commands


def cmd_mn(args) -> int:
    n = _dimension(args.n)
    spec = _spec(args)
    if args.alpha is None:
        rep = compute_Mn(n, spec)
    else:
        if not 0 < args.alpha <= 1:
            raise UsageError("--alpha must lie in (0, 1]")
        rep = compute_Mn_alpha(n, args.alpha, spec)
    out = rep.as_dict()
    out["config"] = config_echo(args)
    _write_json(out, args.out)
    return EXIT_OK


def cmd_table(args) -> int:
    spec = _spec(args)
    rows = []
    for n in range(1, MAX_DIM + 1):
        rep = compute_Mn(n, spec)
        c_err = rep.cn * rep.err_est
        ps = rep.p_star
        if ps is None:
            ps_err = None
        else:
            den = n - 1 + rep.cnMn / 4.0
            ps_err = n / (2.0 * den * den) * c_err
        rows.append({"n": n, "cnMn": rep.cnMn, "cnMn_err": c_err, "p_star": ps, "p_star_err": ps_err})
    _write_csv(rows, ["n", "cnMn", "cnMn_err", "p_star", "p_star_err"], args.out, config_echo(args))
    return EXIT_OK


def _suite_kernel(spec, rng):
    tol = 1e-6
    for n in range(1, 5):
        radii = np.sort(rng.uniform(0.0, 10.0, 10))
        for r in radii:
            res = kernel_identity_residuals(float(r), n, spec)
            yield (f"n={n} r={r:.6g}", res.max_residual(), tol)


def _suite_pohozaev(spec, rng):
    # residuals relative to the largest term, for every p < p_*(n) tried
    for n in range(1, 5):
        ps = p_star(n, compute_Mn(n, spec).cnMn)
        if ps is None:
            continue
        exponents = [p for p in (1.5, 2.0, 3.0) if p < ps] + [1.0 + 0.5 * (ps - 1.0)]
        for p in exponents:
            beta = 1.0 / (p - 1.0)
            c = beta ** beta
            scale = max(1.0, beta * c * c * q_n(n), c ** (p + 1) * q_n(n))
            for value in (0.0, c, -c):
                res = pohozaev_residuals(ProfileField(n, p, constant_profile(n, value)), spec)
                worst = max(abs(v) for v in res.as_tuple())
                yield (f"n={n} p={p:.6g} w={value:+.6g}", worst / scale, 1e-8)


def _suite_energy(spec, rng):
    for p in (1.5, 2.0, 3.0):
        beta = 1.0 / (p - 1.0)
        c = beta ** beta
        exact = c * c * q_n(1) / (2.0 * (p + 1.0))
        Eh = energy(ProfileField(1, p, constant_profile(1, c)), spec).E_hat
        yield (f"E_hat[beta^beta] p={p}", abs(Eh - exact) / exact, 1e-8)
        E0 = energy(ProfileField(1, p, constant_profile(1, 0.0)), spec).E_hat
        yield (f"E_hat[beta^beta] > E_hat[0] p={p}", 0.0 if Eh > E0 == 0.0 else 1.0, 0.5)


def _suite_eta(spec, rng):
    radii = np.geomspace(0.5, 500.0, 12)
    for n in (1, 2, 3):
        for delta in (0.25, 0.5, 0.75):
            eb = eta_bound_ratio(delta, n, radii, spec)
            finite = bool(np.all(np.isfinite(eb.ratios)))
            # report the ratio range; fail only when it is not finite
            yield (f"n={n} delta={delta} max_ratio={eb.max_ratio:.6g} tail={eb.ratios[-1]:.6g}",
                   0.0 if finite else math.inf, 1.0)


SUITES = {"kernel": _suite_kernel, "pohozaev": _suite_pohozaev, "energy": _suite_energy, "eta": _suite_eta}


def cmd_verify(args) -> int:
    spec = _spec(args)
    rng = np.random.default_rng(args.seed)
    print(f"# {config_echo(args)}")
    failed = 0
    for label, value, tol in SUITES[args.suite](spec, rng):
        ok = value <= tol
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {args.suite} {label} residual={fmt(value)} tol={fmt(tol)}")
    print(f"{args.suite}: {'all checks passed' if failed == 0 else f'{failed} check(s) failed'}")
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


def cmd_simulate(args) -> int:
    if args.n != 1:
        raise UsageError("simulate supports --n 1 only")
    if not args.p > 1:
        raise UsageError("--p must exceed 1")
    if args.N < 8 or args.N & (args.N - 1):
        raise UsageError("--N must be a power of two >= 8")
    if not args.L > 0:
        raise UsageError("--L must be positive")
    controls = StepControls(safety=args.safety, t_max=args.t_max, threshold=args.threshold)
    config = config_echo(args)
    os.makedirs(args.out, exist_ok=True)
    u0 = GridField.from_function(lambda x: args.amp * rho(x, 1), 1, args.L, args.N)
    result = simulate_to_blowup(u0, args.p, controls)
    _write_csv(list(result.rows()), ["t", "sup_norm", "mass_tail"], os.path.join(args.out, "trajectory.csv"),
               config)

    beta = 1.0 / (args.p - 1.0)
    report = {"config": config, "blew_up": result.blew_up, "stop_reason": result.reason,
              "steps": result.steps, "t_end": result.final.t, "final_sup_norm": result.final.sup_norm,
              "boundary_contamination": result.contaminated,
              "max_mass_tail": float(np.max(result.mass_tail)),
              "beta": beta, "target_amplitude": beta ** beta}
    fit = None
    fit_error = None
    if result.blew_up:
        try:
            fit = rate_fit(result.times, result.sup_norms, args.p)
        except FitError as exc:
            fit_error = str(exc)
    T = fit.T_est if fit is not None else result.final.t + 1.0
    report.update({"T_est": fit.T_est if fit else None, "T_reference": T,
                   "beta_fit": fit.beta_fit if fit else None,
                   "amplitude_limit": fit.amplitude_limit if fit else None,
                   "fit_residual": fit.residual if fit else None,
                   "fit_decades": fit.decades if fit else None, "fit_error": fit_error})
    if result.contaminated:
        report["warning"] = "more than 1% of the mass lies within L/4 of the box boundary"

    trace = similarity_trace(result, T=T)
    g = result.final.field
    x0 = float(g.axis()[int(np.argmax(np.abs(g.values)))])
    report["x0"] = x0
    report["terminal_amplitude"] = terminal_amplitude(result, T, x0)
    report["classification"] = limit_profile_classify(to_self_similar(result.final, T, x0), args.p).value

    Mn = compute_Mn(1).Mn
    lo, hi = epsilon_band(1, args.p, Mn)
    rows = []
    if lo <= hi and len(trace) >= 2:
        eps = hi if args.epsilon is None else args.epsilon
        et = monotonicity_defect([s.trace_sample() for s in trace], args.p, 1, eps, Mn)
        rows = list(et.rows())
        report.update({"epsilon": eps, "monotone": et.holds, "monotonicity_tolerance": et.tolerance,
                       "worst_pair_margin": et.worst_pair})
    else:
        report.update({"epsilon": None, "monotone": None,
                       "monotonicity_note": "empty epsilon band (p >= p_*) or fewer than two resolved samples"})
    _write_csv(rows, ["s", "E_hat", "drift_sq", "diff_rho", "diff_drho", "defect"],
               os.path.join(args.out, "energy_trace.csv"), config)
    _write_json(report, os.path.join(args.out, "rate.json"))
    if result.blew_up and fit is None:
        print(f"rate fit failed: {fit_error}", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="halfheat", description="Half-Laplacian heat flow: constants, identities and blow-up runs.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("mn", help="M_n, c_n M_n and p_*(n) as JSON")
    p.add_argument("n", type=int)
    p.add_argument("--alpha", type=float, default=None, help="fractional order; uses rho_alpha")
    p.add_argument("--tol", type=float, default=None, help="relative quadrature tolerance")
    p.add_argument("--out", default=None, help="output path (stdout if omitted)")
    p.set_defaults(func=cmd_mn)

    p = sub.add_parser("table", help="c_n M_n and p_*(n) for n = 1..5 as CSV")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("verify", help="run an invariant suite")
    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="blow-up run from amp * rho, rate fit and energy trace")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--amp", type=float, required=True)
    p.add_argument("--L", type=float, default=64.0)
    p.add_argument("--N", type=int, default=4096)
    p.add_argument("--t-max", type=float, default=100.0)
    p.add_argument("--safety", type=float, default=0.01)
    p.add_argument("--threshold", type=float, default=1e8)
    p.add_argument("--epsilon", type=float, default=None, help="default: upper end of the admissible band")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"halfheat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureError, SupremumError) as exc:
        print(f"halfheat: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FitError as exc:
        print(f"halfheat: fit failure: {exc}", file=sys.stderr)
        return EXIT_FIT
    except ValueError as exc:
        print(f"halfheat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
