import math

import numpy as np
import pytest
import scipy.sparse as sp

from netchemo.network import ArcSpec, build_grids, make_network
from netchemo.parabolic import GlobalPhiSystem, PhiOperator, assemble, compute_f, recover_phi_x, solve
from netchemo.scenarios import builtin_scenario

LAM = math.sqrt(0.33)


def interval(cells, length=1.0, k=None, **phys):
    net = make_network([ArcSpec(1, 0, 1, length, LAM, **phys)])
    k = length / cells / (2 * LAM) if k is None else k
    return net, build_grids(net, k)


def trap(p, h):
    return h * (p.sum() - 0.5 * (p[0] + p[-1]))


def weights(n):
    """Quadrature the discrete Neumann rows conserve exactly: 3/2 next to each end."""
    w = np.ones(n)
    w[0] = w[-1] = 0.0
    w[1] = w[-2] = 1.5
    return w


# --------------------------------------------------------------------------
# one Crank-Nicolson step

def test_uniform_state_is_stationary_without_sources():
    net, grids = interval(20, a=0.0, b=0.0)
    n = grids[0].n_points
    (phi,) = PhiOperator(net, grids).step([np.zeros(n)], [np.zeros(n)], [np.full(n, 2.0)])
    assert np.abs(phi - 2.0).max() <= 1e-13


def test_uniform_decay_factor():
    k = 0.5
    net, grids = interval(10, length=10 * 2 * k * LAM, k=k, a=0.0, b=0.1, D=0.7)
    n = grids[0].n_points
    (phi,) = PhiOperator(net, grids).step([np.zeros(n)], [np.zeros(n)], [np.full(n, 3.0)])
    assert np.abs(phi - 3.0 * 0.975 / 1.025).max() <= 1e-13


def test_kedem_katchalsky_keeps_equal_constants():
    net = make_network([ArcSpec(1, 0, 1, 1.0, LAM, a=0.0, b=0.0), ArcSpec(2, 1, 2, 1.0, LAM, a=0.0, b=0.0)])
    grids = build_grids(net, 1 / 20 / (2 * LAM))
    zeros = [np.zeros(g.n_points) for g in grids]
    phi = PhiOperator(net, grids).step(zeros, zeros, [np.full(g.n_points, 1.5) for g in grids])
    for p in phi:
        assert np.abs(p - 1.5).max() <= 1e-13


def test_source_term_uses_both_density_levels():
    net, grids = interval(10, a=2.0, b=0.0)
    n = grids[0].n_points
    k = grids[0].k
    zero = np.zeros(n)
    (phi,) = PhiOperator(net, grids).step([np.full(n, 1.0)], [np.full(n, 3.0)], [zero])
    assert np.abs(phi - 2.0 * k / 2 * 4.0).max() <= 1e-13


# --------------------------------------------------------------------------
# linear solve

def test_solve_matches_dense_oracle():
    rng = np.random.default_rng(11)
    n = 150
    bands = {d: rng.normal(size=n - abs(d)) for d in range(-3, 4)}
    bands[0] = bands[0] + 10.0
    A = sp.diags(list(bands.values()), list(bands.keys()), format="csc")
    b = rng.normal(size=n)
    (x,) = solve(GlobalPhiSystem(A, b, np.array([0, n])))
    assert np.abs(x - np.linalg.solve(A.toarray(), b)).max() <= 1e-10


def test_identity_solve():
    b = np.arange(7.0)
    (x,) = solve(GlobalPhiSystem(sp.identity(7, format="csc"), b, np.array([0, 7])))
    assert np.array_equal(x, b)


def test_t_network_first_step_residual():
    cfg = builtin_scenario("t_example1")
    net = cfg.resolved_network()
    grids = build_grids(net, cfg.k)
    rng = np.random.default_rng(0)
    u = [rng.uniform(0.25, 0.35, g.n_points) for g in grids]
    phi = [np.full(g.n_points, 2.0 if g.arc_id == 2 else 0.0) for g in grids]
    system = assemble(net, grids, u, u, phi)
    x = np.concatenate(solve(system))
    assert np.abs(system.matrix @ x - system.rhs).max() <= 1e-10 * np.abs(system.rhs).max()
    lo, hi = system.bandwidth
    assert lo > 0 and hi > 0


# --------------------------------------------------------------------------
# derivative recovery and f

def test_phi_x_exact_on_quadratics():
    h = 0.1
    x = h * np.arange(11)
    assert np.abs(recover_phi_x(x ** 2, h) - 2 * x).max() <= 1e-12
    assert np.array_equal(recover_phi_x(np.full(11, 4.2), h), np.zeros(11))


def test_phi_x_second_order():
    errs = []
    for cells in (20, 40, 80):
        h = 1.0 / cells
        x = h * np.arange(cells + 1)
        errs.append(np.abs(recover_phi_x(np.sin(x), h) - np.cos(x)).max())
    for coarse, fine in zip(errs, errs[1:]):
        assert coarse / fine == pytest.approx(4.0, rel=0.15)


def test_compute_f():
    rng = np.random.default_rng(12)
    u, px = rng.normal(size=50), rng.normal(size=50)
    assert np.abs(compute_f(u, px, 0.7) - np.array([0.7 * a * b for a, b in zip(px, u)])).max() <= 1e-15
    assert not compute_f(np.zeros(5), px[:5], 1.0).any()
    assert not compute_f(u, px, 0.0).any()


# --------------------------------------------------------------------------
# conservation and dissipation

def _pure_diffusion(cells):
    net, grids = interval(cells, a=0.0, b=0.0)
    op = PhiOperator(net, grids)
    g = grids[0]
    zero = [np.zeros(g.n_points)]
    x = g.x
    phi = op.step(zero, zero, [np.cos(3 * x) + x ** 3])[0]   # now satisfies the boundary rows
    return op, g, zero, phi


def test_phi_mass_conserved_by_boundary_weighted_quadrature():
    op, g, zero, phi = _pure_diffusion(40)
    w = weights(g.n_points)
    m0 = g.h * w @ phi
    for _ in range(50):
        phi = op.step(zero, zero, [phi])[0]
        assert abs(g.h * w @ phi - m0) <= 1e-10


def test_trapezoidal_phi_mass_drift_is_second_order():
    drifts = []
    for cells in (20, 40, 80):
        op, g, zero, phi = _pure_diffusion(cells)
        new = op.step(zero, zero, [phi])[0]
        drifts.append(abs(trap(new, g.h) - trap(phi, g.h)))
    assert drifts[0] / drifts[1] > 3.5 and drifts[1] / drifts[2] > 3.5


def test_energy_non_increasing():
    op, g, zero, phi = _pure_diffusion(30)
    w = weights(g.n_points)
    energy = [w @ phi ** 2]
    trap_energy = [trap(phi ** 2, g.h)]
    for _ in range(300):
        phi = op.step(zero, zero, [phi])[0]
        energy.append(w @ phi ** 2)
        trap_energy.append(trap(phi ** 2, g.h))
    assert np.diff(energy).max() <= 1e-12 * energy[0]
    assert trap_energy[-1] < trap_energy[0]
    assert np.diff(trap_energy).max() <= 1e-4 * trap_energy[0]


def test_kedem_katchalsky_fluxes_cancel_at_node():
    cfg = builtin_scenario("wheatstone_noflux")
    net = cfg.resolved_network()
    grids = build_grids(net, cfg.k)
    rng = np.random.default_rng(13)
    op = PhiOperator(net, grids)
    phi = [rng.uniform(0, 1, g.n_points) for g in grids]
    u = [rng.uniform(0.4, 0.6, g.n_points) for g in grids]
    for _ in range(3):
        phi = op.step(u, u, phi)
    for node in net.internal_nodes:
        total = 0.0
        for a in node.incoming:
            p = net.arc_index[a]
            total += net.arcs[p].D * recover_phi_x(phi[p], grids[p].h)[-1]
        for a in node.outgoing:
            p = net.arc_index[a]
            total -= net.arcs[p].D * recover_phi_x(phi[p], grids[p].h)[0]
        assert abs(total) <= 1e-9


def test_crank_nicolson_second_order_in_time():
    b, T, phi0 = 0.5, 2.0, 1.0
    errs = []
    for steps in (8, 16, 32, 64):
        k = T / steps
        net, grids = interval(4, length=4 * 2 * k * LAM, k=k, a=0.0, b=b)
        op = PhiOperator(net, grids)
        n = grids[0].n_points
        zero = [np.zeros(n)]
        phi = [np.full(n, phi0)]
        for _ in range(steps):
            phi = op.step(zero, zero, phi)
        errs.append(np.abs(phi[0] - phi0 * math.exp(-b * T)).max())
    orders = [math.log2(c / f) for c, f in zip(errs, errs[1:])]
    assert all(abs(o - 2.0) <= 0.2 for o in orders)
