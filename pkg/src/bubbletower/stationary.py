"""Radial sign-changing stationary solutions by shooting, refined on the grid.

The radial stationary equation u'' + (N-1)/r u' + |u|^{p-1}u = 0 on (eps, 1)
with zero boundary values is integrated in the log/scaled variables
s = log r, w = r^{(N-2)/2} u, where it becomes the autonomous conservative
oscillator

    w'' = beta^2 w - |w|^{p-1} w,      beta = (N-2)/2.

Orbits of this oscillator are bounded (the energy
w'^2/2 - beta^2 w^2/2 + |w|^{p+1}/(p+1) is conserved), zeros of w are zeros
of u, and a k-lobe solution is an orbit with k-1 interior zeros returning to
w = 0 after time log(1/eps). Shooting in these variables is therefore immune
to the blow-up that plagues the raw radial variable. The converged shot is
then projected to the grid and polished by a damped Newton iteration on the
discrete boundary-value problem, so downstream spectral and flow work acts on
an actual discrete solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from .errors import SolverError
from .mesh import RadialField, RadialGrid, apply_radial_laplacian, build_grid, norms
from .params import ProblemParams
from .profile import extract_concentrations

_W_ESCAPE = 1e6  # no bounded orbit comes near this; guards integrator blowups


@dataclass
class ShootResult:
    """One radial shot: interior zero count, terminal value, and the dense orbit."""

    slope: float
    zero_count: int
    terminal_value: float
    escaped: bool = False
    escape_radius: float | None = None
    _dense: object = field(default=None, repr=False)
    _params: ProblemParams = field(default=None, repr=False)

    def on_grid(self, grid: RadialGrid) -> RadialField:
        """Evaluate the trajectory u(r) = r^{-beta} w(log r) at the grid nodes."""
        if self._dense is None:
            raise SolverError("shot carries no trajectory")
        r = grid.nodes
        beta = self._params.beta
        w = self._dense(np.log(r))[0]
        vals = r ** (-beta) * w
        vals[0] = 0.0
        vals[-1] = 0.0
        return RadialField(grid, vals, dirichlet=True)


def shoot(params: ProblemParams, s: float, rtol: float = 1e-10, atol: float = 1e-13) -> ShootResult:
    """Integrate the radial IVP u(eps)=0, u'(eps)=s and report the nodal data.

    The returned zero_count counts interior sign changes on (eps, 1);
    terminal_value is u(1) (equal to w at s=0).
    """
    if not math.isfinite(s):
        raise ValueError(f"slope must be finite, got {s}")
    p, beta, eps = params.p, params.beta, params.eps
    s0 = math.log(eps)
    w0 = 0.0
    dw0 = s * eps ** (beta + 1.0)  # chain rule: w'(log eps) from u'(eps)
    if dw0 == 0.0:
        # (0, 0) initial data rides the invariant zero solution; integrating it
        # would trip the zero event at every accepted step
        return ShootResult(
            slope=s,
            zero_count=0,
            terminal_value=0.0,
            _dense=lambda t: np.zeros((2,) + np.shape(t)),
            _params=params,
        )

    def rhs(t, y):
        w, dw = y
        return (dw, beta * beta * w - abs(w) ** (p - 1.0) * w)

    def zero_event(t, y):
        return y[0]

    zero_event.direction = 0

    def escape_event(t, y):
        return abs(y[0]) - _W_ESCAPE

    escape_event.terminal = True

    sol = solve_ivp(
        rhs,
        (s0, 0.0),
        (w0, dw0),
        method="DOP853",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=(zero_event, escape_event),
    )
    if not sol.success and sol.status != 1:
        raise SolverError(f"shooting integrator failed: {sol.message}")
    escaped = sol.status == 1 and sol.t_events[1].size > 0
    guard = 1e-9 * abs(s0)
    crossings = sol.t_events[0]
    interior = crossings[(crossings > s0 + guard) & (crossings < -guard)]
    w_end = float(sol.sol(0.0)[0]) if not escaped else float("nan")
    return ShootResult(
        slope=s,
        zero_count=int(interior.size),
        terminal_value=w_end,
        escaped=escaped,
        escape_radius=float(np.exp(sol.t_events[1][0])) if escaped else None,
        _dense=sol.sol,
        _params=params,
    )


@dataclass
class StationarySolution:
    """A converged sign-changing stationary solution resident on its grid.

    field           : zero-trace nodal values (orientation: innermost lobe positive)
    nodal_radii     : the k-1 interior zeros
    deltas_measured : concentration scales read off the transformed profile
    shooting_slope  : converged initial slope s* (positive by normalization)
    residual_norm   : sup norm of the discrete stationary residual, relative to
                      max(1, sup|f(u)|); double precision puts an absolute floor
                      ~ |u| eps_mach / h^2 at the spikes, so only the scaled
                      residual is meaningful there
    """

    params: ProblemParams
    field: RadialField
    nodal_radii: np.ndarray
    deltas_measured: np.ndarray
    shooting_slope: float
    residual_norm: float
    newton_iterations: int = 0
    newton_shift: float = 0.0
    residual_history: list = None


def stationary_residual(u: RadialField, params: ProblemParams) -> RadialField:
    """-Delta_h u - f(u): zero (to solver tolerance) at a stationary solution.

    Sign convention matches the sub/supersolution checks: a subsolution has
    residual <= 0 at interior nodes.
    """
    lap = apply_radial_laplacian(u)
    vals = -lap.values - params.reaction(u.values)
    vals[0] = 0.0
    vals[-1] = 0.0
    return RadialField(u.grid, vals)


def _scaled_residual_norm(u: RadialField, params: ProblemParams) -> float:
    res = stationary_residual(u, params).values[1:-1]
    scale = max(1.0, float(np.max(np.abs(params.reaction(u.values)))))
    return float(np.max(np.abs(res))) / scale


def _newton_refine(
    u0: RadialField,
    params: ProblemParams,
    floor: float = 1e-13,
    max_iter: int = 50,
) -> tuple[RadialField, list]:
    """Damped Newton on the discrete BVP Delta_h u + f(u) = 0 (interior rows).

    Backtracking line search on the scaled residual sup norm; stops at the
    floor or on stall (no factor-2 progress over two steps).
    """
    g = u0.grid
    beta_f, D = g.face_weights, g.cell_weights
    Din = D[1:-1]
    lo = beta_f[1:-1] / Din[1:]  # sub-diagonal entries (rows 2..)
    up = beta_f[1:-1] / Din[:-1]  # super-diagonal entries (rows ..n-1)
    diag_lap = -(beta_f[:-1] + beta_f[1:]) / Din
    u = u0.values.copy()
    n = Din.size
    scale = max(1.0, float(np.max(np.abs(params.reaction(u)))))

    def resid(vals):
        fld = RadialField(g, vals)
        r = apply_radial_laplacian(fld).values[1:-1] + params.reaction(vals[1:-1])
        return r

    hist = []
    F = resid(u)
    res = float(np.max(np.abs(F))) / scale
    hist.append(res)
    it = 0
    while res > floor and it < max_iter:
        ab = np.zeros((3, n))
        ab[0, 1:] = up
        ab[1, :] = diag_lap + params.reaction_derivative(u[1:-1])
        ab[2, :-1] = lo
        try:
            delta = solve_banded((1, 1), ab, -F, overwrite_ab=True, overwrite_b=False)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular Newton system: {exc}", {"history": hist})
        t = 1.0
        for _ in range(30):
            trial = u.copy()
            trial[1:-1] += t * delta
            Ft = resid(trial)
            rest = float(np.max(np.abs(Ft))) / scale
            if rest <= res * (1.0 - 0.25 * t) or rest <= floor:
                u, F, res = trial, Ft, rest
                break
            t *= 0.5
        else:
            break
        hist.append(res)
        it += 1
        if it > 3 and res > 0.5 * hist[-3]:
            break  # stalled at the fp floor
    return RadialField(g, u, dirichlet=True), hist


def _interior_zeros(u: RadialField) -> np.ndarray:
    r, v = u.grid.nodes, u.values
    sign = np.sign(v[1:-1])
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0] + 1
    zs = []
    for j in idx:
        r0, r1, v0, v1 = r[j], r[j + 1], v[j], v[j + 1]
        zs.append(r0 - v0 * (r1 - r0) / (v1 - v0))
    return np.array(zs)


def find_nodal_solution(
    params: ProblemParams,
    k: int | None = None,
    M: int = 4096,
    scan_range: tuple = (1e-2, 1e10),
    per_decade: int = 40,
    ivp_rtol: float = 1e-10,
    residual_tol: float = 1e-8,
) -> StationarySolution:
    """Find the k-lobe stationary solution: bracket, root-find, grid-refine.

    Bracketing scans positive slopes geometrically and isolates the nodal
    class with exactly k-1 interior zeros; within the class, the terminal
    value changes sign and a root-find pins s*. Ties inside a class resolve
    to the smallest slope (the scan runs upward and stops at the first
    bracket). The grid stage runs damped Newton from the interpolated shot.

    Orientation: slopes are scanned positive, so the innermost lobe of the
    returned solution is positive; the mirrored solution is -field.
    """
    if k is None:
        k = params.k
    elif k != params.k:
        params = ProblemParams(params.N, k, params.eps)
    target = k - 1

    lo, hi = scan_range
    n_pts = int(np.ceil(per_decade * np.log10(hi / lo))) + 1
    slopes = np.geomspace(lo, hi, n_pts)
    prev: ShootResult | None = None
    bracket = None
    transitions = []
    for s in slopes:
        cur = shoot(params, float(s), rtol=ivp_rtol)
        if prev is not None and cur.zero_count != prev.zero_count:
            transitions.append((prev.slope, prev.zero_count, cur.slope, cur.zero_count))
        if (
            prev is not None
            and prev.zero_count == target
            and not prev.escaped
            and not cur.escaped
            and prev.terminal_value * cur.terminal_value < 0
        ):
            # the zero enters through the outer endpoint, so at the far side
            # of the bracket the interior count is already target + 1
            bracket = (prev.slope, cur.slope)
            break
        if cur.zero_count > target + 2:
            break
        prev = cur
    if bracket is None:
        raise SolverError(
            f"no slope bracket with {target} interior zeros found in "
            f"[{lo:g}, {hi:g}] at {per_decade}/decade",
            {"transitions": transitions},
        )

    def terminal(s):
        return shoot(params, s, rtol=ivp_rtol).terminal_value

    s_star = brentq(terminal, *bracket, rtol=8.9e-16, maxiter=200)
    best = shoot(params, s_star, rtol=ivp_rtol)

    grid = build_grid(params.eps, 1.0, M, "log", params.N)
    u_shot = best.on_grid(grid)
    u, hist = _newton_refine(u_shot, params)
    res_norm = _scaled_residual_norm(u, params)
    if res_norm > residual_tol:
        raise SolverError(
            f"Newton refinement stalled at scaled residual {res_norm:.3e} > {residual_tol:g}",
            {"history": hist},
        )

    zeros = _interior_zeros(u)
    if zeros.size != target:
        raise SolverError(
            f"refined solution has {zeros.size} interior zeros, expected {target}",
            {"zeros": zeros.tolist()},
        )
    if norms(u)["l2_weighted"] < 1e-3:
        raise SolverError("solution collapsed toward zero (weighted L2 < 1e-3)")

    deltas = extract_concentrations(u, k)
    return StationarySolution(
        params=params,
        field=u,
        nodal_radii=zeros,
        deltas_measured=deltas,
        shooting_slope=float(s_star),
        residual_norm=res_norm,
        newton_iterations=len(hist) - 1,
        newton_shift=float(np.max(np.abs(u.values - u_shot.values))),
        residual_history=hist,
    )


def verify_scaling_law(
    N: int,
    k: int,
    eps_list,
    M: int = 4096,
    solutions: dict | None = None,
) -> dict:
    """Fit the exponents of measured delta_i against eps across a sweep.

    Expected exponents are (2i-1)/(2k). Requires at least 3 eps values
    spanning a decade. Pre-solved solutions can be passed to avoid recompute;
    per-eps solver failures are collected and flagged, and the fit proceeds
    when at least 3 values survive.
    """
    eps_arr = np.sort(np.asarray(list(eps_list), dtype=float))[::-1]
    if eps_arr.size < 3:
        raise ValueError(f"need >= 3 eps values for a slope fit, got {eps_arr.size}")
    if eps_arr[0] / eps_arr[-1] < 10.0:
        raise ValueError("eps values must span at least one decade")
    table = {}
    failures = {}
    for eps in eps_arr:
        try:
            sol = None if solutions is None else solutions.get(float(eps))
            if sol is None:
                sol = find_nodal_solution(ProblemParams(N, k, float(eps)), M=M)
            table[float(eps)] = sol.deltas_measured
        except SolverError as exc:
            failures[float(eps)] = str(exc)
    if len(table) < 3:
        raise SolverError("fewer than 3 converged solutions in the sweep", {"failures": failures})
    eps_ok = np.array(sorted(table))
    log_eps = np.log(eps_ok)
    exponents = {}
    for i in range(k):
        log_d = np.log([table[e][i] for e in eps_ok])
        exponents[i + 1] = float(np.polyfit(log_eps, log_d, 1)[0])
    expected = {i + 1: (2 * (i + 1) - 1) / (2 * k) for i in range(k)}
    return {
        "exponents": exponents,
        "expected": expected,
        "deltas": {e: table[e].tolist() for e in eps_ok},
        "failures": failures,
    }
