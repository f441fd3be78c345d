import math

import numpy as np
import pytest
from scipy.special import erf

from shearquench import pde
from shearquench.model import InitialData, PhysParams, build_reaction
from shearquench.profiles import make_profile


def erf_solution(x, t, L, kappa):
    """Heat-kernel convolution of the sharp indicator (exact, no advection/reaction)."""
    s = math.sqrt(4.0 * kappa * t)
    return 0.5 * (erf((L - x) / s) + erf((L + x) / s))


def test_erf_oracle(params, still, zero_reaction):
    L = 2.0
    init = InitialData(L=L)
    grid = pde.Grid2D(X=18.0, nx=192, ny=8, y_extent=2 * math.pi)
    num = pde.Numerics(dt=0.25 * grid.dx**2)
    traj = pde.evolve_T(params, zero_reaction, still, 0.0, init, grid,
                        L * L / params.kappa, record=[L * L / params.kappa],
                        numerics=num)
    snap = traj.snapshots[-1]
    exact = erf_solution(grid.x_nodes, snap.time, L, params.kappa)
    assert np.max(np.abs(snap.values - exact[:, None])) <= 5e-3
    assert not traj.flags["domain_clipped"]


def test_evolve_phi_matches_erf(params, still):
    init = InitialData(L=1.0)
    grid = pde.Grid2D(X=14.0, nx=224, ny=8, y_extent=2 * math.pi)
    traj = pde.evolve_Phi(params, still, 0.0, init, grid, 1.0, record=[1.0],
                          numerics=pde.Numerics(dt=0.25 * grid.dx**2))
    snap = traj.snapshots[-1]
    exact = erf_solution(grid.x_nodes, snap.time, 1.0, params.kappa)
    assert np.max(np.abs(snap.values - exact[:, None])) <= 5e-3


def test_convergence_order_against_erf(params, still):
    L, t_end = 2.0, 4.0
    init = InitialData(L=L)
    errs = []
    for nx in (96, 192, 384):
        grid = pde.Grid2D(X=18.0, nx=nx, ny=8, y_extent=2 * math.pi)
        traj = pde.evolve_Phi(params, still, 0.0, init, grid, t_end, record=[t_end],
                              numerics=pde.Numerics(dt=0.25 * grid.dx**2))
        snap = traj.snapshots[-1]
        exact = erf_solution(grid.x_nodes, snap.time, L, params.kappa)
        errs.append(np.max(np.abs(snap.values - exact[:, None])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.7), f"observed orders {orders}"


def test_constant_flow_is_a_translation(params, reaction):
    c, A, t_end = 0.3, 5.0, 0.5
    init = InitialData(L=2.0)
    grid = pde.Grid2D(X=12.0, nx=960, ny=8, y_extent=2 * math.pi)
    num = pde.Numerics(dt=2e-3)
    moving = make_profile("constant", {"c": c})
    still_p = make_profile("constant", {"c": 0.0})
    tr0 = pde.evolve_T(params, reaction, still_p, 0.0, init, grid, t_end,
                       record=[t_end], numerics=num)
    trc = pde.evolve_T(params, reaction, moving, A, init, grid, t_end,
                       record=[t_end], numerics=num)
    x = grid.x_nodes
    base = tr0.snapshots[-1].values[:, 0]
    shifted = np.interp(x, x + A * c * t_end, base, left=0.0, right=0.0)
    assert np.max(np.abs(trc.snapshots[-1].values[:, 0] - shifted)) <= 1e-3


def test_maximum_principle_and_overshoot(params, reaction, sine):
    init = InitialData(L=3.0)
    grid = pde.Grid2D(X=80.0, nx=640, ny=48, y_extent=2 * math.pi)
    traj = pde.evolve_T(params, reaction, sine, 12.0, init, grid, 3.0,
                        record=[1.0, 3.0], numerics=pde.Numerics(cfl_diff=1.0))
    assert np.all(traj.supnorm <= 1.0)
    assert np.all(traj.supnorm >= 0.0)
    assert traj.flags["max_overshoot"] <= 1e-10
    for snap in traj.snapshots:
        assert snap.values.min() >= 0.0 and snap.values.max() <= 1.0


def test_psi_invariant_without_flow(params, still):
    init = InitialData(L=2.0)
    grid = pde.Grid2D(X=10.0, nx=160, ny=16, y_extent=2 * math.pi)
    traj = pde.evolve_Psi(params, still, 0.0, init, grid, 0.5, record=[0.5],
                          numerics=pde.Numerics(dt=5e-3))
    expected = init.cell_averages(grid.x_nodes, grid.dx)
    assert np.max(np.abs(traj.snapshots[-1].values - expected[:, None])) <= 1e-12
    assert np.all(traj.supnorm <= 1.0)


def _comparison_violations(params, reaction, sine, nx, ny, dt, times, A_values):
    init = InitialData(L=1.0)
    grid = pde.Grid2D(X=16.0, nx=nx, ny=ny, y_extent=2 * math.pi)
    num = pde.Numerics(dt=dt)
    worst_TP, worst_PS = -np.inf, -np.inf
    for A in A_values:
        trT = pde.evolve_T(params, reaction, sine, A, init, grid, times[-1],
                           record=times, numerics=num)
        trP = pde.evolve_Phi(params, sine, A, init, grid, times[-1],
                             record=times, numerics=num)
        trS = pde.evolve_Psi(params, sine, A, init, grid, times[-1],
                             record=times, numerics=num)
        for sT, sP, sS in zip(trT.snapshots, trP.snapshots, trS.snapshots):
            growth = math.exp(params.bigM * sT.time)
            worst_TP = max(worst_TP, float(np.max(sT.values - sP.values * growth)))
            worst_PS = max(worst_PS, float(np.max(np.max(sP.values, axis=0)
                                                  - np.max(sS.values, axis=0))))
    return worst_TP, worst_PS


def test_comparison_bounds_tighten_under_refinement(params, reaction, sine):
    times = [0.04, 0.08]
    coarse = _comparison_violations(params, reaction, sine, 128, 32, 2e-3, times, (0.0, 20.0))
    fine = _comparison_violations(params, reaction, sine, 256, 64, 1e-3, times, (0.0, 20.0))
    tol_c = 0.5 * (16.0 / 128) ** 2 + 0.5 * (2e-3) ** 2
    for v_c, v_f in zip(coarse, fine):
        assert v_c <= tol_c
        assert v_f <= max(0.5 * v_c, 0.25 * tol_c)


def test_dirichlet_strip_extinguishes_below_pi(params, reaction):
    l = 0.5 * math.pi * params.laminar()
    grid = pde.Grid2D(X=10.0, nx=160, ny=24, y_extent=l, bc_y="dirichlet")
    traj = pde.solve_dirichlet_strip(l, 2.0, params, reaction, grid, 10.0,
                                     numerics=pde.Numerics(cfl_diff=1.0,
                                                           stop_below=0.1))
    assert traj.first_time_below(reaction.theta0 / 2.0) is not None


def test_dirichlet_strip_persists_when_wide(params, reaction):
    l = 10.0 * params.laminar()
    grid = pde.Grid2D(X=26.0, nx=208, ny=48, y_extent=l, bc_y="dirichlet")
    traj = pde.solve_dirichlet_strip(l, 8.0, params, reaction, grid, 20.0,
                                     numerics=pde.Numerics(cfl_diff=1.0))
    assert traj.supnorm[-1] >= reaction.theta0


def test_dirichlet_strip_linear_decay_rate(params, zero_reaction):
    l = 2.0
    grid = pde.Grid2D(X=14.0, nx=160, ny=64, y_extent=l, bc_y="dirichlet")
    traj = pde.solve_dirichlet_strip(l, 4.0, params, zero_reaction, grid, 1.2,
                                     numerics=pde.Numerics(dt=1e-3))
    t, s = traj.times, traj.supnorm
    mask = t >= 0.4  # past the transient, pure lowest-mode decay
    rate = -np.polyfit(t[mask], np.log(s[mask]), 1)[0]
    expected = params.kappa * math.pi**2 / l**2
    assert abs(rate - expected) <= 0.1 * expected


def test_strip_dominated_by_periodic(params, reaction):
    """Dirichlet walls only lose heat relative to the periodic strip."""
    l = 4.0
    ny = 32
    grid_d = pde.Grid2D(X=12.0, nx=96, ny=ny, y_extent=l, bc_y="dirichlet")
    grid_p = pde.Grid2D(X=12.0, nx=96, ny=ny, y_extent=l, bc_y="periodic")
    num = pde.Numerics(dt=2e-3)
    still_p = make_profile("constant", {"c": 0.0}, h=l)
    tr_d = pde.solve_dirichlet_strip(l, 2.0, params, reaction, grid_d, 1.0,
                                     record=[0.5, 1.0], numerics=num)
    tr_p = pde.evolve_T(params, reaction, still_p, 0.0, InitialData(L=2.0),
                        grid_p, 1.0, record=[0.5, 1.0], numerics=num)
    for sd, sp in zip(tr_d.snapshots, tr_p.snapshots):
        # interior Dirichlet nodes sit between periodic nodes; compare against
        # the x-profile of the periodic run (uniform in y)
        assert np.max(sd.values.max(axis=1) - sp.values.max(axis=1)) <= 1e-8


def test_solve_1d_dirichlet_cases(params, reaction):
    ny = 96
    tr0 = pde.solve_1d_dirichlet(4.0, params, reaction,
                                 np.zeros(ny), 2.0, ny=ny)
    assert np.max(tr0.supnorm) == 0.0
    # narrow interval: uniform ignition collapses
    tr1 = pde.solve_1d_dirichlet(3.0, params, reaction,
                                 lambda y: np.ones_like(y), 30.0, ny=ny,
                                 numerics=pde.Numerics(cfl_diff=1.0, stop_below=0.01))
    assert tr1.supnorm[-1] < 0.05
    # wide interval: stays ignited
    tr2 = pde.solve_1d_dirichlet(12.0, params, reaction,
                                 lambda y: np.ones_like(y), 30.0, ny=ny,
                                 numerics=pde.Numerics(cfl_diff=1.0))
    assert tr2.supnorm[-1] >= reaction.theta0


def test_post_quench_decay_exponent(params, reaction, still):
    grid = pde.Grid2D(X=85.0, nx=680, ny=8, y_extent=2 * math.pi)
    traj = pde.evolve_T(params, reaction, still, 0.0, InitialData(L=0.1),
                        grid, 105.0, numerics=pde.Numerics(cfl_diff=1.0))
    tau = traj.first_time_below(reaction.theta0)
    assert tau is not None
    t, s = traj.times, traj.supnorm
    mask = (t >= tau + 1.0) & (t <= tau + 100.0)
    slope = np.polyfit(np.log(t[mask] - tau), np.log(s[mask]), 1)[0]
    assert slope <= -0.4
    # sup-norm never increases once below the cutoff
    i0 = np.searchsorted(t, tau)
    assert np.max(np.diff(s[i0:])) <= 1e-8


def test_domain_clipped_flag_is_loud(params, reaction):
    moving = make_profile("constant", {"c": 1.0})
    grid = pde.Grid2D(X=4.0, nx=64, ny=8, y_extent=2 * math.pi)
    traj = pde.evolve_T(params, reaction, moving, 10.0, InitialData(L=1.0),
                        grid, 1.0, numerics=pde.Numerics(dt=2e-3))
    assert traj.flags["domain_clipped"]
    assert traj.flags["clip_time"] is not None
    assert traj.flags["max_boundary_value"] > 1e-8


def test_grid_validation():
    with pytest.raises(ValueError, match="nx and ny"):
        pde.Grid2D(X=1.0, nx=4, ny=8, y_extent=1.0)
    with pytest.raises(ValueError, match="bc_y"):
        pde.Grid2D(X=1.0, nx=8, ny=8, y_extent=1.0, bc_y="robin")
    g = pde.Grid2D(X=2.0, nx=16, ny=8, y_extent=1.0)
    assert g.dx == pytest.approx(0.25)
    assert g.dy == pytest.approx(0.125)
    gd = pde.Grid2D(X=2.0, nx=16, ny=7, y_extent=1.0, bc_y="dirichlet")
    assert gd.dy == pytest.approx(0.125)
    assert gd.y_nodes[0] == pytest.approx(0.125)


def test_design_grid_safety_formula(params, sine):
    init = InitialData(L=2.0)
    g = pde.design_grid(params, sine, 10.0, init, 1.0)
    assert g.X >= 2.0 + 10.0 * 1.0 + 8.0
    assert g.dx <= 2.0 / 64 + 1e-12


def test_trajectory_crossing_interpolation():
    times = np.array([0.0, 1.0, 2.0])
    sup = np.array([1.0, 0.5, 0.1])
    traj = pde.Trajectory(times=times, supnorm=sup, l1=sup.copy(), snapshots=[],
                          grid=pde.Grid2D(X=1.0, nx=8, ny=8, y_extent=1.0))
    assert traj.first_time_below(0.3) == pytest.approx(1.5)
    assert traj.first_time_below(0.05) is None
    assert traj.supnorm_history[0] == (0.0, 1.0)
