"""Command-line entry point.

Subcommands: tower, eig, limit, flow, sweep, verify, report.
Configuration comes from defaults, then an optional --config file (flat
key=value lines), then CLI flags, in increasing precedence. Exit codes:
0 success, 1 usage or configuration error, 2 solver failure.
"""
from __future__ import annotations

import argparse
import sys

from .errors import SolverError
from .harness import RUNNERS, fmt6, load_config, resolve_config

# argparse dest -> config key
_FLAG_KEYS = {
    "N": "N",
    "k": "k",
    "eps": "eps",
    "M": "M",
    "lam": "lambda",
    "eps_list": "eps_list",
    "lambda_list": "lambda_list",
    "radii": "radii",
    "M_limit": "M_limit",
    "t_end": "t_end",
    "dt_max": "dt_max",
    "integrator": "integrator",
}


def _float_list(raw: str) -> tuple:
    try:
        return tuple(float(tok) for tok in raw.split(",") if tok.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {raw!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bubbletower",
        description="Sign-changing bubble-tower equilibria of the critical heat "
        "equation on annuli: stationary profiles, spectra, and flow runs.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="flat key=value config file")
    common.add_argument("--out", default="runs", help="output root directory (default: runs)")

    problem = argparse.ArgumentParser(add_help=False)
    problem.add_argument("--N", type=int, default=None, help="space dimension (>= 3)")
    problem.add_argument("--k", type=int, default=None, help="number of tower layers")
    problem.add_argument("--eps", type=float, default=None, help="inner radius of the annulus")
    problem.add_argument("--M", type=int, default=None, help="number of grid cells")

    sub = parser.add_subparsers(dest="op", required=True, metavar="SUBCOMMAND")
    sub.add_parser("tower", parents=[common, problem], help="find the k-layer stationary solution")
    sub.add_parser("eig", parents=[common, problem], help="first eigenpair and sign condition")

    p_limit = sub.add_parser("limit", parents=[common], help="limit eigenvalue problem on balls")
    p_limit.add_argument("--N", type=int, default=None, help="space dimension (>= 3)")
    p_limit.add_argument("--radii", type=_float_list, default=None, help="ball radii, comma-separated")
    p_limit.add_argument("--M-limit", dest="M_limit", type=int, default=None, help="cells at the largest radius")

    p_flow = sub.add_parser("flow", parents=[common, problem], help="single parabolic run from lambda*phi")
    p_flow.add_argument("--lambda", dest="lam", type=float, default=None, help="initial-data multiplier")
    p_flow.add_argument("--t-end", dest="t_end", type=float, default=None, help="time horizon")
    p_flow.add_argument("--dt-max", dest="dt_max", type=float, default=None, help="time-step ceiling")
    p_flow.add_argument(
        "--integrator", choices=("imex-be", "imex-cn", "reaction-only"), default=None
    )

    p_sweep = sub.add_parser("sweep", parents=[common, problem], help="eps x lambda classification table")
    p_sweep.add_argument("--eps-list", dest="eps_list", type=_float_list, default=None)
    p_sweep.add_argument("--lambda-list", dest="lambda_list", type=_float_list, default=None)
    p_sweep.add_argument("--t-end", dest="t_end", type=float, default=None, help="time horizon")

    sub.add_parser("verify", parents=[common], help="run the fast invariant suite")
    sub.add_parser("report", parents=[common], help="collate run summaries under --out into CSV")
    return parser


def _console_summary(op: str, summary: dict) -> str:
    if op == "tower":
        return (
            f"tower: slope={fmt6(summary['shooting_slope'])} "
            f"residual={fmt6(summary['residual_norm'])} "
            f"zeros={summary['interior_zeros']} "
            f"d_hat={[fmt6(d) for d in summary['d_hat']]}"
        )
    if op == "eig":
        return (
            f"eig: lambda1={fmt6(summary['lambda1'])} "
            f"residual={fmt6(summary['eigen_residual'])} "
            f"inner_product={fmt6(summary['inner_product'])} "
            f"identity={fmt6(summary['identity_residual'])}"
        )
    if op == "limit":
        ladder = " ".join(f"R={R}:{fmt6(v)}" for R, v in summary["lambda_star_R"].items())
        return f"limit: lambda*={fmt6(summary['lambda_star'])} [{ladder}] overlap={fmt6(summary['overlap'])}"
    if op == "flow":
        extra = f" T={fmt6(summary['T_estimate'])}" if summary.get("T_estimate") else ""
        return (
            f"flow: lambda={fmt6(summary['lambda'])} status={summary['status']}{extra} "
            f"drift_rel={fmt6(summary['drift_rel'])}"
        )
    if op == "sweep":
        counts = ", ".join(f"{k}={v}" for k, v in sorted(summary["status_counts"].items()))
        return f"sweep: {summary['cells']} cells ({counts})"
    if op == "verify":
        n = len(summary["checks"])
        return f"verify: {n}/{n} checks passed"
    if op == "report":
        return f"report: collated {summary['runs']} runs ({summary['version']})"
    return op


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    overrides = {
        key: getattr(args, dest)
        for dest, key in _FLAG_KEYS.items()
        if getattr(args, dest, None) is not None
    }
    try:
        file_cfg = load_config(args.config) if args.config else {}
        cfg = resolve_config(file_cfg, overrides)
        outdir, summary = RUNNERS[args.op](cfg, args.out, config_path=args.config)
        print(_console_summary(args.op, summary))
        print(f"outputs: {outdir}")
        return 0
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
