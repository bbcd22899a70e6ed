import numpy as np
import pytest

import oracles
from scalarflow.fields import ModeLattice
from scalarflow.observations import (canonical_ic_pair, pack_ic_pair,
                                     unpack_components)
from scalarflow.presets import (radial_flow, random_scalar, random_velocity,
                                sin_x1)
from scalarflow.solver import (SingleVelocityPropagator, SolverConfig,
                               energy_report, export_trajectory,
                               load_trajectory, paired_distance_L2,
                               paired_solve, solve)


def _final_coeffs(traj):
    return traj.coeffs[traj.index_of_time(traj.config.T)]


def test_pure_diffusion_matches_closed_form():
    cfg = SolverConfig(kappa=0.05, T=1.0, K=8)
    traj = solve(radial_flow(0.0), sin_x1(), cfg)
    n = 64
    xs = (np.arange(n) + 0.5) / n
    grid = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
    got = traj.field_at(traj.index_of_time(1.0)).evaluate(grid)
    want = np.exp(-4 * np.pi ** 2 * 0.05) * np.sin(2 * np.pi * grid[:, 0])
    assert np.abs(got - want).max() <= 1e-8


def test_matches_exponential_of_generator(rng):
    v = random_velocity(2, rng, 2.5)
    theta0 = random_scalar(4, rng)
    cfg = SolverConfig(kappa=0.05, T=0.5, K=4)
    traj = solve(v, theta0, cfg)
    exact, modes = oracles.exact_coeffs(v, theta0, 0.05, 4, 0.5)
    assert [tuple(m) for m in traj.lattice.modes] == modes
    assert np.abs(_final_coeffs(traj) - exact).max() <= 2e-8


def test_step_size_convergence_is_fourth_order(rng):
    v = random_velocity(2, rng, 2.5)
    theta0 = random_scalar(4, rng)
    exact, _ = oracles.exact_coeffs(v, theta0, 0.05, 4, 0.5)
    errs = []
    for dt in (0.01, 0.005):
        cfg = SolverConfig(kappa=0.05, T=0.5, K=4, dt_max=dt)
        traj = solve(v, theta0, cfg)
        errs.append(np.abs(_final_coeffs(traj) - exact).max())
    ratio = errs[0] / errs[1]
    assert 10.0 < ratio < 24.0


def test_courant_reduction_keeps_accuracy(rng):
    v = random_velocity(2, rng, 2.5, norm=8.0)
    theta0 = random_scalar(4, rng)
    cfg = SolverConfig(kappa=0.05, T=0.5, K=4)
    traj = solve(v, theta0, cfg)
    assert traj.u_sup > 5.0
    exact, _ = oracles.exact_coeffs(v, theta0, 0.05, 4, 0.5)
    assert np.abs(_final_coeffs(traj) - exact).max() <= 5e-7


def test_energy_identity_and_step_halving(rng):
    v = random_velocity(2, rng, 2.5)
    theta0 = random_scalar(3, rng)
    worst = []
    for dt, h in ((0.01, 1e-3), (0.005, 5e-4)):
        cfg = SolverConfig(kappa=0.05, T=1.0, K=6, dt_max=dt, h_chk=h)
        rep = energy_report(solve(v, theta0, cfg))
        worst.append(rep.worst)
    l2_0 = float(np.sum(np.abs(theta0.coeffs) ** 2))
    assert worst[0] <= 1e-5 * l2_0
    assert worst[0] / worst[1] >= 4.0


def test_energy_report_warns_when_snapshots_are_coarse(rng):
    v = random_velocity(1, rng, 2.5)
    cfg = SolverConfig(kappa=0.05, T=1.0, K=4, dt_max=0.001)
    traj = solve(v, random_scalar(3, rng), cfg)   # default spacing T/64
    with pytest.warns(UserWarning, match="snapshot spacing"):
        energy_report(traj)


def test_sup_norm_never_grows(rng):
    for _ in range(5):
        v = random_velocity(2, rng, 2.5)
        theta0 = random_scalar(3, rng)
        cfg = SolverConfig(kappa=0.05, T=0.5, K=5)
        traj = solve(v, theta0, cfg)
        assert traj.check_max_principle(tol=1e-6) <= 1e-6


def test_required_times_are_retained_exactly(rng):
    v = random_velocity(1, rng, 2.5)
    req = (0.1234, 0.5, 0.987)
    cfg = SolverConfig(kappa=0.05, T=1.0, K=4)
    traj = solve(v, random_scalar(2, rng), cfg, required_times=req)
    for t in req:
        traj.index_of_time(t)       # raises if the snapshot is missing


def test_paired_solve_matches_two_single_solves(rng):
    v = random_velocity(2, rng, 2.5)
    pair = canonical_ic_pair()
    cfg = SolverConfig(kappa=0.05, T=0.5, K=5)
    ta, tb = paired_solve(v, pair, cfg)
    sa = solve(v, pair.theta1, cfg)
    sb = solve(v, pair.theta2, cfg)
    assert np.abs(ta.coeffs - sa.coeffs).max() <= 1e-12
    assert np.abs(tb.coeffs - sb.coeffs).max() <= 1e-12


def test_propagator_agrees_with_grid_path(rng):
    v = random_velocity(2, rng, 2.5)
    cfg = SolverConfig(kappa=0.05, T=0.5, K=5)
    pair = canonical_ic_pair()
    lattice = ModeLattice(cfg.K)
    Z0 = pack_ic_pair(pair, lattice)
    ta, tb = paired_solve(v, pair, cfg)
    # identical landmark schedule makes the two step sequences identical
    prop = SingleVelocityPropagator(v, cfg)
    final = prop.run(Z0, ta.times, lambda i, t, Z: None)
    c1, c2 = unpack_components(final, lattice)
    assert np.abs(c1 - ta.coeffs[-1]).max() <= 1e-13
    assert np.abs(c2 - tb.coeffs[-1]).max() <= 1e-13


def test_export_round_trip_is_bit_exact(tmp_path, rng):
    v = random_velocity(1, rng, 2.5)
    cfg = SolverConfig(kappa=0.05, T=0.25, K=3, h_chk=0.05)
    traj = solve(v, random_scalar(2, rng), cfg)
    export_trajectory(traj, tmp_path / "traj")
    back = load_trajectory(tmp_path / "traj")
    assert (back.times == traj.times).all()
    assert (back.coeffs == traj.coeffs).all()


def test_paired_distance_is_symmetric_and_zero_on_self(rng):
    va = random_velocity(1, rng, 2.5)
    vb = random_velocity(1, rng, 2.5, norm=0.7)
    cfg = SolverConfig(kappa=0.05, T=0.5, K=4, h_chk=0.01)
    pair = canonical_ic_pair()
    pa = paired_solve(va, pair, cfg)
    pb = paired_solve(vb, pair, cfg)
    assert paired_distance_L2(pa, pa) == 0.0
    dab = paired_distance_L2(pa, pb)
    assert dab == pytest.approx(paired_distance_L2(pb, pa), rel=1e-13)
    want = np.sqrt(
        oracles.trajectory_distance_sq(pa[0].coeffs, pb[0].coeffs, pa[0].times)
        + oracles.trajectory_distance_sq(pa[1].coeffs, pb[1].coeffs,
                                         pa[1].times))
    assert dab == pytest.approx(want, rel=1e-12)
