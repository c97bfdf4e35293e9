"""Experiment orchestration: config files, run directories, manifests, CSV output.

Config files are flat key=value lines with # comments; unknown keys are
rejected so typos cannot silently fall back to defaults. Every run writes
into its own directory named <operation>-<hash8> where the hash covers the
fully resolved configuration and the artifact version, so re-running the
same configuration lands in the same directory and reproduces the same data
files byte for byte (timestamps live only in the manifest). Data files carry
17 significant digits; console summaries print 6.
"""
from __future__ import annotations

import dataclasses
import datetime
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .errors import SolverError
from .flow import FlowConfig, comparison_monitor, evolve, lambda_sweep
from .mesh import RadialField, apply_radial_laplacian, build_grid
from .params import ProblemParams
from .profile import Bubble, bubble_eval, ef_peak_height
from .spectral import (
    assemble_linearized,
    assemble_operator,
    eigenvalue_k,
    first_eigenpair,
    limit_eigenpair,
    limit_overlap,
    limit_scan,
    scaled_eigenvalue_diagnostic,
    sign_condition,
)
from .stationary import find_nodal_solution, stationary_residual

# key -> (default, parser); list-valued keys hold comma-separated floats
_FLOATS = "floats"
_SCHEMA = {
    "N": (4, int),
    "k": (2, int),
    "eps": (1e-3, float),
    "M": (4096, int),
    "scan_lo": (1e-2, float),
    "scan_hi": (1e10, float),
    "per_decade": (40, int),
    "ivp_rtol": (1e-10, float),
    "residual_tol": (1e-8, float),
    "lambda": (1.0, float),
    "lambda_list": ((0.1, 0.95, 1.0, 1.05), _FLOATS),
    "eps_list": ((1e-2, 1e-3, 1e-4), _FLOATS),
    "radii": ((20.0, 40.0, 80.0), _FLOATS),
    "M_limit": (4096, int),
    "dt_max": (1e-5, float),
    "dt_min": (1e-12, float),
    "t_end": (2.0, float),
    "blow_threshold": (1e3, float),
    "safety": (0.1, float),
    "stationary_tol": (1e-4, float),
    "integrator": ("imex-be", str),
}


def _parse_value(key: str, raw: str):
    kind = _SCHEMA[key][1]
    try:
        if kind is _FLOATS:
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        return kind(raw)
    except ValueError as exc:
        raise ValueError(f"config key {key!r}: cannot parse {raw!r}") from exc


def load_config(path) -> dict:
    """Parse a flat key=value file; unknown keys and malformed lines are errors."""
    cfg = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _SCHEMA:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        cfg[key] = _parse_value(key, raw)
    return cfg


def resolve_config(file_cfg: dict | None = None, overrides: dict | None = None) -> dict:
    """defaults <- file <- CLI flags, then range validation."""
    cfg = {k: v for k, (v, _) in _SCHEMA.items()}
    for layer in (file_cfg or {}, overrides or {}):
        for key, val in layer.items():
            if key not in _SCHEMA:
                raise ValueError(f"unknown config key {key!r}")
            cfg[key] = val
    ProblemParams(cfg["N"], cfg["k"], cfg["eps"])
    _flow_config(cfg)
    if cfg["M"] < 16 or cfg["M_limit"] < 16:
        raise ValueError("grid resolution must be at least 16 cells")
    if not 0 < cfg["scan_lo"] < cfg["scan_hi"]:
        raise ValueError("need 0 < scan_lo < scan_hi")
    return cfg


def _flow_config(cfg: dict) -> FlowConfig:
    return FlowConfig(
        dt_max=cfg["dt_max"],
        dt_min=cfg["dt_min"],
        t_end=cfg["t_end"],
        blow_threshold=cfg["blow_threshold"],
        safety=cfg["safety"],
        integrator=cfg["integrator"],
        stationary_tol=cfg["stationary_tol"],
    )


def _fmt17(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def fmt6(x) -> str:
    try:
        return format(float(x), ".6g")
    except (TypeError, ValueError):
        return str(x)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt17(x) for x in row) + "\n")


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _hash8(op: str, cfg: dict) -> str:
    blob = json.dumps({"op": op, "version": __version__, "config": _sanitize(cfg)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:8]


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _file_sha256(path) -> str | None:
    if path is None:
        return None
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _start_manifest(op: str, cfg: dict, config_path) -> dict:
    return {
        "version": __version__,
        "operation": op,
        "config": _sanitize(cfg),
        "grid": {"M": cfg["M"], "grading": "log", "inner": cfg["eps"], "outer": 1.0},
        "tolerances": {
            "ivp_rtol": cfg["ivp_rtol"],
            "residual_tol": cfg["residual_tol"],
            "stationary_tol": cfg["stationary_tol"],
        },
        "input_hashes": {"config_file": _file_sha256(config_path)},
        "started": _now(),
    }


def _finish(outdir: Path, manifest: dict, summary: dict) -> None:
    manifest["finished"] = _now()
    manifest["outcome"] = _sanitize(summary)
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(outdir / "summary.json", "w") as fh:
        json.dump(_sanitize(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _make_outdir(root, op: str, cfg: dict) -> Path:
    outdir = Path(root) / f"{op}-{_hash8(op, cfg)}"
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir


def _build_solution(cfg: dict):
    params = ProblemParams(cfg["N"], cfg["k"], cfg["eps"])
    return find_nodal_solution(
        params,
        M=cfg["M"],
        scan_range=(cfg["scan_lo"], cfg["scan_hi"]),
        per_decade=cfg["per_decade"],
        ivp_rtol=cfg["ivp_rtol"],
        residual_tol=cfg["residual_tol"],
    )


def _tower_summary(sol) -> dict:
    k, eps = sol.params.k, sol.params.eps
    d_hat = [
        float(d / eps ** ((2 * (i + 1) - 1) / (2 * k)))
        for i, d in enumerate(sol.deltas_measured)
    ]
    return {
        "N": sol.params.N,
        "k": k,
        "eps": eps,
        "shooting_slope": sol.shooting_slope,
        "residual_norm": sol.residual_norm,
        "newton_iterations": sol.newton_iterations,
        "interior_zeros": len(sol.nodal_radii),
        "nodal_radii": [float(r) for r in sol.nodal_radii],
        "deltas_measured": [float(d) for d in sol.deltas_measured],
        "d_hat": d_hat,
    }


def run_tower(cfg: dict, root, config_path=None):
    outdir = _make_outdir(root, "tower", cfg)
    manifest = _start_manifest("tower", cfg, config_path)
    sol = _build_solution(cfg)
    res = stationary_residual(sol.field, sol.params)
    write_csv(
        outdir / "profile.csv",
        ["r", "u", "residual"],
        zip(sol.field.grid.nodes, sol.field.values, res.values),
    )
    summary = _tower_summary(sol)
    _finish(outdir, manifest, summary)
    return outdir, summary


def run_eig(cfg: dict, root, config_path=None):
    outdir = _make_outdir(root, "eig", cfg)
    manifest = _start_manifest("eig", cfg, config_path)
    sol = _build_solution(cfg)
    op = assemble_linearized(sol)
    pair = first_eigenpair(op)
    cond = sign_condition(sol, pair)
    delta_k = float(sol.deltas_measured[-1])
    write_csv(
        outdir / "eigenfunction.csv",
        ["r", "phi1"],
        zip(pair.phi.grid.nodes, pair.phi.values),
    )
    summary = {
        **_tower_summary(sol),
        "lambda1": pair.lam,
        "eigen_residual": pair.residual,
        "lambda_tilde": delta_k * delta_k * pair.lam,
        "inner_product": cond["inner_product"],
        "identity_residual": cond["identity_residual"],
        "reaction_inner_product": cond["reaction_inner_product"],
        "overlap_scaled": cond["overlap_scaled"],
    }
    _finish(outdir, manifest, summary)
    return outdir, summary


def run_limit(cfg: dict, root, config_path=None):
    outdir = _make_outdir(root, "limit", cfg)
    manifest = _start_manifest("limit", cfg, config_path)
    N = cfg["N"]
    scan = limit_scan(N, radii=cfg["radii"], M_at_largest=cfg["M_limit"])
    R_max = max(cfg["radii"])
    pair = limit_eigenpair(N, R_max, cfg["M_limit"])
    write_csv(
        outdir / "limit_eigenfunction.csv",
        ["r", "phi_star"],
        zip(pair.phi.grid.nodes, pair.phi.values),
    )
    summary = {
        "N": N,
        "lambda_star_R": {f"{R:g}": v for R, v in scan["lambda_star_R"].items()},
        "lambda_star": scan["lambda_star"],
        "r_convergence": scan["r_convergence"],
        "h_gap": scan["h_gap"],
        "overlap": limit_overlap(N, pair),
    }
    _finish(outdir, manifest, summary)
    return outdir, summary


def run_flow(cfg: dict, root, config_path=None):
    outdir = _make_outdir(root, "flow", cfg)
    manifest = _start_manifest("flow", cfg, config_path)
    sol = _build_solution(cfg)
    lam = cfg["lambda"]
    fcfg = _flow_config(cfg)
    if lam == 1.0:
        pair = first_eigenpair(assemble_linearized(sol))
        fcfg = dataclasses.replace(fcfg, t_end=10.0 / abs(pair.lam))
    v0 = RadialField(sol.field.grid, lam * sol.field.values, dirichlet=True)
    res = evolve(v0, sol.params, fcfg)
    write_csv(outdir / "series.csv", ["t", "sup", "energy", "dt"], res.series)
    summary = {
        "N": sol.params.N,
        "k": sol.params.k,
        "eps": sol.params.eps,
        "lambda": lam,
        "status": res.status,
        "T_estimate": res.T_estimate,
        "T_bracket": list(res.T_bracket) if res.T_bracket else None,
        "sup0": res.sup0,
        "drift_rel": res.drift / max(res.sup0, 1e-300),
        "t_end": fcfg.t_end,
        "steps": int(res.series.shape[0]),
    }
    _finish(outdir, manifest, summary)
    return outdir, summary


def run_sweep(cfg: dict, root, config_path=None):
    """eps x lambda classification table; per-cell failures flagged, not fatal."""
    outdir = _make_outdir(root, "sweep", cfg)
    manifest = _start_manifest("sweep", cfg, config_path)
    fcfg = _flow_config(cfg)
    table = []
    for eps in cfg["eps_list"]:
        sub = dict(cfg)
        sub["eps"] = float(eps)
        try:
            sol = _build_solution(sub)
            pair = first_eigenpair(assemble_linearized(sol))
        except SolverError as exc:
            for lam in cfg["lambda_list"]:
                table.append(
                    {"eps": float(eps), "lambda": float(lam), "status": "Failed", "message": str(exc)}
                )
            continue
        for row in lambda_sweep(sol, cfg["lambda_list"], fcfg, pair):
            table.append({"eps": float(eps), **row})
    write_csv(
        outdir / "sweep.csv",
        ["eps", "lambda", "status", "T_estimate", "sup_final", "drift_rel"],
        (
            [
                r["eps"],
                r["lambda"],
                r["status"],
                r.get("T_estimate"),
                r.get("sup_final"),
                r.get("drift_rel"),
            ]
            for r in table
        ),
    )
    counts = {}
    for r in table:
        counts[r["status"]] = counts.get(r["status"], 0) + 1
    summary = {"cells": len(table), "status_counts": counts, "table": table}
    _finish(outdir, manifest, summary)
    return outdir, summary


def _verify_checks() -> list:
    """Fast invariant suite: grid formulas, discrete operators, a small tower,
    the zero-potential eigenvalue, shift exactness, and flow classification
    sanity. Each entry is (name, passed, detail)."""
    checks = []

    g = build_grid(1e-2, 1.0, 200, grading="log")
    checks.append(
        ("grid-log-midpoint", abs(g.nodes[100] - 0.1) <= 1e-15, f"r_100={g.nodes[100]!r}")
    )
    gu = build_grid(0.5, 1.0, 16, grading="uniform")
    exact = all(gu.nodes[j] == 0.5 + j / 32 for j in range(17))
    checks.append(("grid-uniform-formula", exact, "r_j = 0.5 + j/32"))

    gl = build_grid(0.1, 1.0, 128, grading="log", N=5)
    const = RadialField(gl, np.ones(gl.nodes.size))
    lap = apply_radial_laplacian(const)
    worst = float(np.max(np.abs(lap.values)))
    checks.append(("laplacian-kills-constants", worst == 0.0, f"max |Lap 1| = {worst!r}"))

    checks.append(
        (
            "ef-peak-height-N4",
            abs(ef_peak_height(4) - math.sqrt(2.0)) <= 1e-12,
            f"w_max={ef_peak_height(4)!r}",
        )
    )
    delta, r = 0.37, np.array([0.05, 0.2, 0.9])
    b1 = bubble_eval(Bubble(delta, 5), r)
    b2 = delta ** (-1.5) * bubble_eval(Bubble(1.0, 5), r / delta)
    scale_err = float(np.max(np.abs(b1 - b2) / b1))
    checks.append(
        ("bubble-scaling-identity", scale_err <= 1e-14, f"rel err {scale_err:.2e}")
    )

    g_eig = build_grid(0.5, 1.0, 1024, grading="uniform", N=3)
    zero_pot = RadialField(g_eig, np.zeros(g_eig.nodes.size))
    op0 = assemble_operator(g_eig, zero_pot)
    lam0 = eigenvalue_k(op0)
    target = 4.0 * math.pi**2
    rel = abs(lam0 - target) / abs(target)
    checks.append(("eig-zero-potential", rel <= 1e-4, f"lambda1={lam0:.10g} rel_err={rel:.2e}"))
    c = 7.25  # adding potential c shifts the spectrum of -Lap - V by -c
    opc = assemble_operator(g_eig, RadialField(g_eig, np.full(g_eig.nodes.size, c)))
    shift_err = abs((eigenvalue_k(opc) - lam0) + c)
    checks.append(("eig-shift-exact", shift_err <= 1e-10, f"|shift error|={shift_err:.2e}"))

    params = ProblemParams(3, 1, 0.1)
    sol = find_nodal_solution(params, M=1024, scan_range=(1e-2, 1e4), per_decade=20)
    ok = sol.residual_norm <= 1e-8 and len(sol.nodal_radii) == 0
    checks.append(
        ("tower-k1", ok, f"residual={sol.residual_norm:.2e} zeros={len(sol.nodal_radii)}")
    )
    pair = first_eigenpair(assemble_linearized(sol))
    cond = sign_condition(sol, pair)
    ok = pair.lam < 0 and cond["inner_product"] > 0 and cond["identity_residual"] <= 1e-6
    checks.append(
        (
            "eig-sign-condition",
            ok,
            f"lambda1={pair.lam:.6g} ip={cond['inner_product']:.6g} "
            f"identity={cond['identity_residual']:.2e}",
        )
    )

    zero0 = RadialField(sol.field.grid, np.zeros(sol.field.values.size), dirichlet=True)
    rz = evolve(zero0, params, FlowConfig(dt_max=1e-4, t_end=1e-3))
    checks.append(("flow-zero-data", rz.status == "GlobalBounded", f"status={rz.status}"))

    gr = build_grid(0.5, 1.0, 64, grading="uniform", N=3)
    ones = RadialField(gr, np.ones(gr.nodes.size))
    rr = evolve(
        ones,
        ProblemParams(3, 1, 0.5),
        FlowConfig(dt_max=1e-4, t_end=2.0, integrator="reaction-only"),
    )
    T_true = 0.25
    ok = (
        rr.status == "BlowUp"
        and rr.T_estimate is not None
        and abs(rr.T_estimate - T_true) <= 0.02 * T_true
    )
    checks.append(
        ("reaction-blowup-time", ok, f"status={rr.status} T={rr.T_estimate} (exact {T_true})")
    )

    bump_vals = 1e-2 * np.sin(np.pi * (gr.nodes - 0.5) / 0.5)
    bump_vals[0] = bump_vals[-1] = 0.0
    bump = RadialField(gr, bump_vals, dirichlet=True)
    zero_small = RadialField(gr, np.zeros(gr.nodes.size), dirichlet=True)
    mon = comparison_monitor(zero_small, bump, ProblemParams(3, 1, 0.5), FlowConfig(dt_max=1e-4, t_end=1e-2))
    checks.append(
        ("comparison-monotone", mon["violation"] <= 1e-12, f"violation={mon['violation']!r}")
    )
    return checks


def run_verify(cfg: dict, root, config_path=None):
    outdir = _make_outdir(root, "verify", cfg)
    manifest = _start_manifest("verify", cfg, config_path)
    checks = _verify_checks()
    summary = {
        "checks": [{"name": n, "passed": bool(p), "detail": d} for n, p, d in checks],
        "passed": all(p for _, p, _ in checks),
    }
    _finish(outdir, manifest, summary)
    if not summary["passed"]:
        failed = ", ".join(n for n, p, _ in checks if not p)
        raise SolverError(f"invariant checks failed: {failed}", {"outdir": str(outdir)})
    return outdir, summary


def run_report(cfg: dict, root, config_path=None):
    """Collate summary.json files under root into report.csv; one version only."""
    root = Path(root)
    rows = []
    versions = set()
    for mpath in sorted(root.glob("*/manifest.json")):
        if mpath.parent.name.startswith("report-"):
            continue
        with open(mpath) as fh:
            manifest = json.load(fh)
        versions.add(manifest.get("version"))
        flat = {"run": mpath.parent.name, "operation": manifest.get("operation")}
        for key, val in sorted(manifest.get("outcome", {}).items()):
            if isinstance(val, (int, float, str, bool)) or val is None:
                flat[key] = val
        rows.append(flat)
    if not rows:
        raise ValueError(f"no run manifests found under {root}")
    if len(versions) > 1:
        raise ValueError(f"refusing to collate mixed artifact versions: {sorted(map(str, versions))}")
    cols = ["run", "operation"]
    extra = sorted({k for row in rows for k in row} - set(cols))
    cols += extra
    outdir = _make_outdir(root, "report", cfg)
    manifest = _start_manifest("report", cfg, config_path)
    write_csv(outdir / "report.csv", cols, ([row.get(c) for c in cols] for row in rows))
    summary = {"runs": len(rows), "version": versions.pop(), "columns": cols}
    _finish(outdir, manifest, summary)
    return outdir, summary


RUNNERS = {
    "tower": run_tower,
    "eig": run_eig,
    "limit": run_limit,
    "flow": run_flow,
    "sweep": run_sweep,
    "verify": run_verify,
    "report": run_report,
}
