import math

import numpy as np
import pytest

import bubbletower as bt
from bubbletower.mesh import apply_radial_laplacian


def test_log_grid_midpoint_and_endpoints():
    g = bt.build_grid(1e-2, 1.0, 200)
    assert g.nodes[0] == 1e-2
    assert g.nodes[-1] == 1.0
    assert abs(g.nodes[100] - 0.1) <= 1e-15
    assert abs(g.nodes_per_decade - 100.0) <= 1e-10


def test_uniform_grid_formula_exact():
    g = bt.build_grid(0.5, 1.0, 16, grading="uniform")
    for j in range(17):
        assert g.nodes[j] == 0.5 + j / 32


def test_grid_validation():
    with pytest.raises(ValueError):
        bt.build_grid(0.1, 1.0, 8)  # too coarse
    with pytest.raises(ValueError):
        bt.build_grid(1.0, 0.5, 64)  # inner >= outer
    with pytest.raises(ValueError):
        bt.build_grid(0.1, 1.0, 64, grading="cubic")
    with pytest.raises(ValueError):
        bt.RadialGrid(np.array([0.1, 0.3, 0.2, 1.0]), N=3)  # not increasing
    with pytest.raises(ValueError):
        bt.RadialGrid(np.linspace(0.1, 1.0, 33), N=2)


def test_dirichlet_field_demands_exact_zero_trace():
    g = bt.build_grid(0.5, 1.0, 32, grading="uniform")
    vals = np.sin(np.pi * (g.nodes - 0.5) / 0.5)
    with pytest.raises(ValueError):
        bt.RadialField(g, vals, dirichlet=True)  # sin endpoint is roundoff, not 0
    vals[0] = vals[-1] = 0.0
    bt.RadialField(g, vals, dirichlet=True)


def test_weighted_quadrature_closed_forms():
    # N=3 annulus (0.5, 1): volume integral of 1 and of 1/r have closed forms
    g = bt.build_grid(0.5, 1.0, 4096, N=3)
    one = bt.RadialField(g, np.ones(g.nodes.size))
    rinv = bt.RadialField(g, 1.0 / g.nodes)
    vol = 4.0 * math.pi * (1.0 - 0.5**3) / 3.0
    assert abs(bt.integrate_weighted(one, one) - vol) <= 1e-7 * vol
    # integrand r^{N-1} * (1/r) is linear in r, trapezoid is exact
    exact = 4.0 * math.pi * 0.375
    assert abs(bt.integrate_weighted(rinv, one) - exact) <= 1e-12 * exact


def test_norms_closed_forms():
    g = bt.build_grid(0.5, 1.0, 4096, N=3)
    one = bt.RadialField(g, np.ones(g.nodes.size))
    vol = 4.0 * math.pi * (1.0 - 0.5**3) / 3.0
    assert abs(bt.norms(one)["l2_weighted"] - math.sqrt(vol)) <= 1e-7

    g4 = bt.build_grid(0.5, 1.0, 256, N=4)
    U = bt.bubble_eval(bt.Bubble(1.0, 4), g4.nodes)
    # bubble is radially decreasing: sup on the annulus sits at the inner edge
    want = 2.0 * math.sqrt(2.0) * 0.8
    assert abs(bt.norms(bt.RadialField(g4, U))["linf"] - want) <= 1e-13


def test_laplacian_annihilates_constants_exactly():
    g = bt.build_grid(0.1, 1.0, 128, N=5)
    lap = apply_radial_laplacian(bt.RadialField(g, np.ones(g.nodes.size)))
    assert float(np.max(np.abs(lap.values))) == 0.0


def test_laplacian_harmonic_profile_at_floor():
    # r^{2-N} is harmonic; the flux form reproduces it to near roundoff
    g = bt.build_grid(0.1, 1.0, 256, N=3)
    lap = apply_radial_laplacian(bt.RadialField(g, g.nodes ** (-1.0)))
    assert float(np.max(np.abs(lap.values[1:-1]))) <= 1e-6


def test_laplacian_quadratic_second_order():
    errs = {}
    for M in (1024, 2048):
        g = bt.build_grid(0.1, 1.0, M, N=4)
        lap = apply_radial_laplacian(bt.RadialField(g, g.nodes**2))
        errs[M] = float(np.max(np.abs(lap.values[1:-1] - 8.0)) / 8.0)
    assert errs[1024] <= 1e-5
    ratio = errs[1024] / errs[2048]
    assert 3.5 <= ratio <= 4.5


def test_laplacian_self_adjoint_in_cell_weights():
    rng = np.random.default_rng(7)
    g = bt.build_grid(1e-2, 1.0, 512, N=4)
    a = rng.standard_normal(g.nodes.size)
    b = rng.standard_normal(g.nodes.size)
    a[0] = a[-1] = b[0] = b[-1] = 0.0
    ua, ub = bt.RadialField(g, a, dirichlet=True), bt.RadialField(g, b, dirichlet=True)
    left = bt.integrate_weighted(apply_radial_laplacian(ua), ub)
    right = bt.integrate_weighted(ua, apply_radial_laplacian(ub))
    scale = max(abs(left), abs(right), 1.0)
    assert abs(left - right) <= 1e-12 * scale


def test_integrate_rejects_mismatched_grids():
    g1 = bt.build_grid(0.1, 1.0, 64, N=3)
    g2 = bt.build_grid(0.1, 1.0, 128, N=3)
    u = bt.RadialField(g1, np.ones(g1.nodes.size))
    v = bt.RadialField(g2, np.ones(g2.nodes.size))
    with pytest.raises(ValueError):
        bt.integrate_weighted(u, v)


def test_ball_grid_origin_cell():
    g = bt.build_ball_grid(20.0, 64, 3)
    assert g.nodes[0] == 0.0
    assert g.origin
    h = g.nodes[1] - g.nodes[0]
    assert abs(g.cell_weights[0] - (0.5 * h) ** 3 / 3.0) <= 1e-18
