"""Command-line front door: classification, kernel tables, bound checks,
eigenvalue scans, non-existence witnesses, fixed-point solves, and the
Monte Carlo oracle.

Every command writes report.json (stable key order, resolved config and
normalization disclaimers embedded) plus command-specific CSV files into the
output directory.  Writes are atomic (temp file then rename) and outputs are
byte-identical across runs with the same config and seed.

Exit codes: 0 success, 1 usage error, 2 validation/precondition error,
3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import BiharmError, DivergentIntegralError, NonConvergenceError, ParameterError
from . import kernels, liouville, profiles, solver, spectral
from .radial import fit_loglog_slope, log_grid

USAGE_EXIT = 1
VALIDATION_EXIT = 2
NONCONVERGENCE_EXIT = 3

DISCLAIMERS = {
    "constants_normalized_to_one": True,
    "normalization_note": liouville.NORMALIZATION_NOTE,
    "constants_note": solver.CONSTANTS_NOTE,
}


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors, per the CLI contract."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(USAGE_EXIT)


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, payload: dict):
    _atomic_write(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_csv(path: Path, header: str, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join(f"{x:.12e}" for x in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _report(out_dir: Path, command: str, config: dict, body: dict):
    payload = {"command": command, "config": config, "disclaimers": DISCLAIMERS}
    payload.update(body)
    _write_json(out_dir / "report.json", payload)
    cfg_lines = [f"{k}={v}" for k, v in sorted(config.items())]
    _atomic_write(out_dir / "resolved.cfg", "\n".join(cfg_lines) + "\n")


def _config_defaults(path: str | None) -> dict:
    if not path:
        return {}
    return profiles.parse_config_text(Path(path).read_text(encoding="utf-8"))


def _max_threads() -> int:
    raw = os.environ.get("BIHARM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _profile_args(p: _Parser, need_n: bool = True):
    p.add_argument("--alpha", type=float, required=True, help="volume-growth exponent")
    p.add_argument("--gamma", type=float, required=True, help="Green-decay exponent")
    if need_n:
        p.add_argument("--n", type=int, default=6, help="small-scale dimension (default 6)")
    p.add_argument("--mode", default=profiles.TWO_REGIME,
                   choices=[profiles.TWO_REGIME, profiles.PURE_POWER])


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="key=value config file with flag defaults")
    common.add_argument("--out-dir", default="out", help="output directory (default ./out)")
    common.add_argument("--seed", type=int, default=0, help="seed for stochastic commands")

    parser = _Parser(prog="biharm", parents=[common],
                     description="numerical toolkit for the biharmonic critical-exponent classification")
    sub = parser.add_subparsers(dest="command", required=True)
    parser._subparser_map = {}

    def add_parser(name, **kw):
        p = sub.add_parser(name, parents=[common], **kw)
        p.error = parser.error
        parser._subparser_map[name] = p
        return p

    p = add_parser("classify", help="place p against both critical thresholds")
    _profile_args(p)
    p.add_argument("--m", type=float, required=True, help="lower-bound weight exponent")
    p.add_argument("--s", type=float, default=None,
                   help="weight-profile exponent; defaults to min(m, 0)")
    p.add_argument("--p", type=float, required=True)

    p = add_parser("kernel-table", help="tabulate the composed Green kernel")
    _profile_args(p)
    p.add_argument("--rho-min", type=float, default=1.0)
    p.add_argument("--rho-max", type=float, default=1e4)
    p.add_argument("--points", type=int, default=41)

    p = add_parser("verify-bounds", help="bounded-potential checks and constants")
    _profile_args(p)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--m", type=float, default=0.0)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--kernel-mode", default=kernels.MODE_SPLIT, choices=kernels.KERNEL_MODES)
    p.add_argument("--grid-lo", type=float, default=1e-2)
    p.add_argument("--grid-hi", type=float, default=1e4)
    p.add_argument("--grid-points", type=int, default=384)

    p = add_parser("eigen", help="surrogate eigenvalue scan on annuli")
    _profile_args(p, need_n=False)
    p.add_argument("--r-values", default="1e2,1e3,1e4",
                   help="comma-separated outer radii (annulus is (R/ratio, R))")
    p.add_argument("--ratio", type=float, default=4.0)
    p.add_argument("--mesh", type=int, default=256)

    p = add_parser("witness", help="non-existence witness scan")
    _profile_args(p)
    p.add_argument("--m", type=float, default=0.0)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--big-n", type=float, default=4.0)
    p.add_argument("--r-inner", type=float, default=2.0)
    p.add_argument("--r-values", default=None,
                   help="comma-separated scan radii (default 2**10 .. 2**20)")
    p.add_argument("--mesh", type=int, default=256)

    p = add_parser("solve", help="fixed-point solve of the double-potential map")
    _profile_args(p)
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--nodes", type=int, default=1024)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--maxit", type=int, default=80)
    p.add_argument("--kernel-mode", default=kernels.MODE_SURROGATE, choices=kernels.KERNEL_MODES)

    p = add_parser("oracle", help="Monte Carlo check of the euclidean kernel")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--x", type=float, required=True, help="evaluation radius")
    p.add_argument("--ball-radius", type=float, default=1.0)
    p.add_argument("--height", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=400000)
    return parser


def _resolved_config(args, keys) -> dict:
    cfg = {"seed": str(args.seed), "command": args.command}
    for k in keys:
        cfg[k] = repr(getattr(args, k)) if isinstance(getattr(args, k), float) \
            else str(getattr(args, k))
    return cfg


def _parse_radii(text: str):
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _cmd_classify(args, out: Path):
    prof = profiles.ManifoldProfile(args.alpha, args.gamma, args.n, args.mode)
    s = args.s if args.s is not None else min(args.m, 0.0)
    src = profiles.SourceProfile(s=s, m=args.m)
    report = profiles.classify(prof, src, args.p)
    cfg = _resolved_config(args, ["alpha", "gamma", "n", "mode", "m", "p"])
    cfg["s"] = repr(float(s))
    _report(out, "classify", cfg, {"classification": report.as_dict(),
                                   "p_star": float(report.p_star_nonexistence)})
    return 0


def _cmd_kernel_table(args, out: Path):
    prof = profiles.ManifoldProfile(args.alpha, args.gamma, args.n, args.mode)
    rhos = log_grid(args.rho_min, args.rho_max, args.points)
    results = [kernels.compose_green(prof, r) for r in rhos]
    diverged = any(res.diverged for res in results)
    rows = [(r, res.value if not res.diverged else math.inf)
            for r, res in zip(rhos, results)]
    _write_csv(out / "kernel_table.csv", "rho,gtilde", rows)
    body = {"diverged": diverged,
            "finiteness_condition": "gamma > alpha/2",
            "tail_exponent": results[0].tail_exponent}
    if not diverged:
        vals = np.array([res.value for res in results])
        body["loglog_slope"] = fit_loglog_slope(rhos, vals)
        body["expected_slope"] = -(2.0 * args.gamma - args.alpha)
    cfg = _resolved_config(args, ["alpha", "gamma", "n", "mode", "rho_min", "rho_max", "points"])
    _report(out, "kernel-table", cfg, body)
    return 0


def _cmd_verify_bounds(args, out: Path):
    prof = profiles.ManifoldProfile(args.alpha, args.gamma, args.n, args.mode)
    src = profiles.SourceProfile(s=args.s, m=args.m)
    plan = profiles.plan_exponents(prof, src, args.p, a=args.a, b=args.b)
    spec = kernels.KernelSpec(args.kernel_mode, prof)
    grid = log_grid(args.grid_lo, args.grid_hi, args.grid_points)
    check1 = solver.verify_prop1(plan, spec, src, grid)
    check2 = solver.verify_prop2(plan, spec, src, grid)
    consts = solver.estimate_constants(plan, spec, src, grid)
    l = solver.pick_l(plan, consts.C, consts.C_prime)
    window = [c.describe() for c in profiles.exponent_window_checks(prof, src, plan)]
    cfg = _resolved_config(args, ["alpha", "gamma", "n", "mode", "s", "m", "p",
                                  "kernel_mode", "grid_lo", "grid_hi", "grid_points"])
    _report(out, "verify-bounds", cfg, {
        "plan": plan.as_dict(),
        "window_conditions": window,
        "sup_ratio_weighted_source": check1.sup_ratio1,
        "sup_ratio_envelope": check1.sup_ratio2,
        "sup_ratio_contraction": check2.sup_ratio,
        "global_sup": check2.global_sup,
        "last_decade_variations": [check1.variation1, check1.variation2, check2.variation],
        "C": consts.C, "C_prime": consts.C_prime, "l": l,
    })
    return 0


def _cmd_eigen(args, out: Path):
    op = spectral.SurrogateOperator(args.alpha, args.gamma)
    radii = _parse_radii(args.r_values)
    results = [spectral.lambda1_annulus(op, R / args.ratio, R, args.mesh) for R in radii]
    rows = [(R, res.value) for R, res in zip(radii, results)]
    _write_csv(out / "eigen.csv", "R,lambda1", rows)
    slope = fit_loglog_slope(np.array(radii), np.array([res.value for res in results]))
    cfg = _resolved_config(args, ["alpha", "gamma", "mode", "r_values", "ratio", "mesh"])
    _report(out, "eigen", cfg, {
        "slope": slope,
        "expected_slope": -(args.alpha - args.gamma),
        "error_estimates": [res.error_estimate for res in results],
    })
    return 0


def _cmd_witness(args, out: Path):
    prof = profiles.ManifoldProfile(args.alpha, args.gamma, args.n, args.mode)
    src = profiles.SourceProfile(s=min(args.m, 0.0), m=args.m)
    kwargs = {"tau": args.tau, "big_n": args.big_n, "r_inner": args.r_inner}
    if args.r_values:
        kwargs["r_list"] = _parse_radii(args.r_values)
    cfg_obj = liouville.WitnessConfig(**kwargs)
    report = liouville.verdict(prof, src, args.p, cfg_obj, args.mesh,
                               threads=_max_threads())
    _write_csv(out / "witness.csv", "R,lhs,rhs",
               [(r, l, h) for r, l, h, _ in report.rows])
    cfg = _resolved_config(args, ["alpha", "gamma", "n", "mode", "m", "p",
                                  "tau", "big_n", "r_inner", "mesh"])
    cfg["r_values"] = ",".join(repr(r) for r in cfg_obj.r_list)
    _report(out, "witness", cfg, {"witness": report.as_dict(), "verdict": report.verdict})
    return 0


def _cmd_solve(args, out: Path):
    prof = profiles.ManifoldProfile(args.alpha, args.gamma, args.n, args.mode)
    src = profiles.SourceProfile(s=args.s, m=0.0)
    plan = profiles.plan_exponents(prof, src, args.p, a=args.a, b=args.b)
    spec = kernels.KernelSpec(args.kernel_mode, prof)
    grid = solver.default_grid(args.nodes)
    report = solver.solve_fixed_point(plan, spec, src, grid, tol=args.tol, maxit=args.maxit)
    if args.kernel_mode == kernels.MODE_SURROGATE:
        res = solver.residual_check(prof, report)
        report = solver.SolveReport(**{**report.__dict__, "residuals": res})
    _write_csv(out / "solution.csv", "rho,u,h",
               zip(report.u.grid, report.u.values, report.h.values))
    cfg = _resolved_config(args, ["alpha", "gamma", "n", "mode", "s", "p",
                                  "nodes", "tol", "maxit", "kernel_mode"])
    _report(out, "solve", cfg, {"solve": report.as_dict(),
                                "membership_margin": report.membership_margin})
    return 0


def _cmd_oracle(args, out: Path):
    src = kernels.BallSource(args.ball_radius, args.height)
    est, stderr = kernels.mc_oracle(args.n, args.x, src, args.samples, args.seed)
    prof = profiles.ManifoldProfile(float(args.n), float(args.n) - 2.0, args.n)
    spec = kernels.KernelSpec(kernels.MODE_EUCLIDEAN, prof)
    exact = float(kernels.potential_values(spec, src, [args.x])[0])
    cfg = _resolved_config(args, ["n", "x", "ball_radius", "height", "samples"])
    _report(out, "oracle", cfg, {
        "estimate": est, "stderr": stderr, "exact": exact,
        "abs_difference": abs(est - exact),
        "within_3_stderr": bool(abs(est - exact) <= 3.0 * stderr + 1e-12),
    })
    return 0


_COMMANDS = {
    "classify": _cmd_classify,
    "kernel-table": _cmd_kernel_table,
    "verify-bounds": _cmd_verify_bounds,
    "eigen": _cmd_eigen,
    "witness": _cmd_witness,
    "solve": _cmd_solve,
    "oracle": _cmd_oracle,
}


def _preload_config(parser: _Parser, argv):
    """Before parsing, turn config-file values into subparser defaults so
    required flags may come from the file; explicit flags keep priority."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    if path is None:
        return
    command = next((tok for tok in argv if tok in _COMMANDS), None)
    if command is None:
        return
    cfg = _config_defaults(path)
    sub = parser._subparser_map[command]
    typed = {}
    for action in sub._actions:
        if action.dest in cfg:
            raw = cfg[action.dest]
            typed[action.dest] = action.type(raw) if action.type else raw
            action.required = False
    unknown = set(cfg) - set(typed) - {"command"}
    if unknown:
        raise ParameterError(f"config keys not accepted by {command!r}: {sorted(unknown)}")
    sub.set_defaults(**typed)


def run(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        _preload_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    except (ParameterError, BiharmError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return VALIDATION_EXIT
    out = Path(args.out_dir)
    try:
        return _COMMANDS[args.command](args, out)
    except (ParameterError, DivergentIntegralError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return VALIDATION_EXIT
    except NonConvergenceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return NONCONVERGENCE_EXIT
    except BiharmError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return VALIDATION_EXIT


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
