import numpy as np
import pytest

import oracles
from scalarflow.errors import BudgetExceededError, ConfigError
from scalarflow.fields import distance_H
from scalarflow.inference import (ParamMap, Potential, PriorSpec,
                                  ZeroPotential, load_trace_csv, pcn_chain,
                                  posterior_from_phis, quadrature_nodes,
                                  quadrature_posterior, sample_prior,
                                  save_trace_csv)
from scalarflow.observations import canonical_ic_pair, sample_design, \
    synthesize_data
from scalarflow.presets import radial_flow
from scalarflow.rng import CHAIN, stream
from scalarflow.solver import SolverConfig

CFG = SolverConfig(kappa=0.05, T=1.0, K=5)
PMAP = ParamMap(((1, 0),))
SPEC = PriorSpec(param_map=PMAP, kind="uniform", radius=1.0)


def test_param_map_round_trips_fields():
    pmap = ParamMap(((1, 0), (1, 1)))
    p = np.array([0.3, -0.1, 0.05, 0.2])
    v = pmap.to_field(p)
    np.testing.assert_allclose(pmap.from_field(v), p, atol=1e-15)
    assert v.reality_defect() < 1e-15
    assert pmap.dof_names() == ["re_1_0", "im_1_0", "re_1_1", "im_1_1"]


def test_param_map_rejects_non_canonical_modes():
    with pytest.raises(ConfigError):
        ParamMap(((-1, 0),))
    with pytest.raises(ConfigError):
        ParamMap(((0, 0),))
    with pytest.raises(ConfigError):
        ParamMap(((1, 0), (1, 0)))


def test_param_distance_equals_field_sobolev_distance():
    pmap = ParamMap(((1, 0), (2, 1)))
    p1 = np.array([0.3, -0.1, 0.02, 0.15])
    p2 = np.array([-0.2, 0.4, 0.1, -0.05])
    for s in (0.0, 2.0, 3.0):
        want = distance_H(pmap.to_field(p1), pmap.to_field(p2), s)
        assert pmap.param_distance(p1, p2, s) == pytest.approx(want, rel=1e-12)


def test_prior_samples_stay_in_support():
    g = stream(5, CHAIN, 0)
    for _ in range(200):
        assert SPEC.contains(sample_prior(SPEC, g))


def test_uniform_prior_sample_moments():
    g = stream(6, CHAIN, 0)
    draws = np.array([sample_prior(SPEC, g) for _ in range(20000)])
    w = draws * SPEC.ball_scales
    second = (w ** 2).mean(axis=0)
    target = SPEC.radius ** 2 / (SPEC.d + 2.0)
    assert np.abs(second - target).max() < 0.05 * target


def test_potential_single_matches_batch(rng):
    design = sample_design(30, 1.0, 13)
    obs = synthesize_data(radial_flow(0.3), design, canonical_ic_pair(),
                          0.05, 13, CFG)
    pot = Potential(obs, canonical_ic_pair(), CFG)
    vs = [PMAP.to_field(sample_prior(SPEC, stream(1, CHAIN, i)))
          for i in range(4)]
    batch = pot.batch(vs)
    for v, phib in zip(vs, batch):
        assert pot.single(v) == pytest.approx(phib, rel=1e-12)


def test_potential_matches_brute_force_residual(rng):
    design = sample_design(8, 1.0, 17)
    obs = synthesize_data(radial_flow(0.25), design, canonical_ic_pair(),
                          0.1, 17, CFG)
    v = PMAP.to_field(np.array([0.2, -0.3]))
    cfg4 = SolverConfig(kappa=0.05, T=1.0, K=4)
    pot = Potential(obs, canonical_ic_pair(), cfg4)
    acc = 0.0
    pair = canonical_ic_pair()
    for j in range(design.n_points):
        t, (x1, x2) = float(design.t[j]), design.x[j]
        for ic, theta0 in ((0, pair.theta1), (1, pair.theta2)):
            coeffs, modes = oracles.exact_coeffs(v, theta0, 0.05, 4, t)
            g = oracles.point_value(coeffs, modes, x1, x2)
            acc += (obs.values[2 * j + ic] - g) ** 2
    want = acc / (2.0 * 0.1 ** 2)
    assert pot.single(v) == pytest.approx(want, abs=1e-5)


def test_free_chain_reproduces_uniform_prior_moments():
    trace = pcn_chain(SPEC, ZeroPotential(), 0.6, 20000, stream(2, CHAIN, 5))
    w = trace.params * SPEC.ball_scales
    second = (w ** 2).mean(axis=0)
    target = SPEC.radius ** 2 / (SPEC.d + 2.0)
    assert np.abs(second - target).max() < 0.05 * target
    assert 0.2 < trace.acceptance_rate < 1.0


def test_free_chain_reproduces_gaussian_prior_moments():
    spec = PriorSpec(param_map=PMAP, kind="gaussian", radius=1.0, tau0=0.2)
    trace = pcn_chain(spec, ZeroPotential(), 0.5, 20000, stream(3, CHAIN, 5))
    second = (trace.params ** 2).mean(axis=0)
    g = stream(4, CHAIN, 6)
    ref = np.array([sample_prior(spec, g) for _ in range(20000)])
    ref_second = (ref ** 2).mean(axis=0)
    assert np.abs(second / ref_second - 1.0).max() < 0.08


def test_tiny_proposals_are_almost_always_accepted():
    trace = pcn_chain(SPEC, ZeroPotential(), 0.005, 4000, stream(7, CHAIN, 1))
    assert trace.acceptance_rate >= 0.99


def test_chain_is_reproducible_and_trace_round_trips(tmp_path):
    a = pcn_chain(SPEC, ZeroPotential(), 0.3, 500, stream(11, CHAIN, 0))
    b = pcn_chain(SPEC, ZeroPotential(), 0.3, 500, stream(11, CHAIN, 0))
    assert (a.params == b.params).all()
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    save_trace_csv(a, p1)
    save_trace_csv(b, p2)
    assert p1.read_bytes() == p2.read_bytes()
    back = load_trace_csv(p1)
    assert (back.params == a.params).all()
    assert (back.accepted == a.accepted).all()


def test_chain_phi_column_is_consistent(rng):
    design = sample_design(10, 1.0, 23)
    obs = synthesize_data(radial_flow(0.3), design, canonical_ic_pair(),
                          0.05, 23, CFG)
    pot = Potential(obs, canonical_ic_pair(), CFG)
    trace = pcn_chain(SPEC, pot, 0.3, 60, stream(23, CHAIN, 0))
    assert trace.verify_phi(pot) <= 1e-10


def test_burn_in_adaptation_moves_beta():
    design = sample_design(30, 1.0, 29)
    obs = synthesize_data(radial_flow(0.3), design, canonical_ic_pair(),
                          0.05, 29, CFG)
    pot = Potential(obs, canonical_ic_pair(), CFG)
    trace = pcn_chain(SPEC, pot, 0.9, 1200, stream(29, CHAIN, 0),
                      burn_in=1000)
    assert trace.beta_final != 0.9


def test_zero_potential_quadrature_recovers_the_flat_prior():
    quad = quadrature_posterior(SPEC, ZeroPotential(), 33)
    inside = np.isfinite(quad.log_prior)
    w = quad.weights[inside]
    assert np.abs(quad.mean_params()).max() < 1e-12
    assert w.max() == pytest.approx(w.min(), rel=1e-12)
    assert quad.ball_mass(SPEC.center, SPEC.radius + 1e-9,
                          SPEC.regularity.m_star) == pytest.approx(1.0)
    assert quad.total_variation_to(quad) == 0.0


def test_quadrature_guards_grid_and_dimension():
    with pytest.raises(ConfigError):
        quadrature_nodes(SPEC, 5)
    big = PriorSpec(param_map=ParamMap(((1, 0), (0, 1), (1, 1))),
                    kind="uniform", radius=1.0)
    with pytest.raises(BudgetExceededError):
        quadrature_nodes(big, 17)


def test_node_volume_array_matches_scalar_volume():
    params, logp, vol = quadrature_nodes(SPEC, 21)
    phi = np.where(np.isfinite(logp), 0.1 * params[:, 0] ** 2, np.inf)
    a = posterior_from_phis(SPEC, 21, params, logp, phi.copy(), vol)
    b = posterior_from_phis(SPEC, 21, params, logp, phi.copy(),
                            np.full(len(params), vol))
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-15)
    assert a.log_normalizer == pytest.approx(b.log_normalizer, rel=1e-12)
