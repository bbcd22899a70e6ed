import numpy as np
import pytest

import oracles
from scalarflow.errors import ConfigError
from scalarflow.fields import ModeLattice, FourierVelocityField
from scalarflow.observations import (ICPair, canonical_ic_pair,
                                     check_spanning, forward_map,
                                     forward_map_batch, load_observations_csv,
                                     sample_design, save_observations_csv,
                                     synthesize_data, _observation_landmarks)
from scalarflow.presets import (radial_flow, random_velocity, sin_x1, sin_x2,
                                symmetric_ic)
from scalarflow.solver import SolverConfig


CFG = SolverConfig(kappa=0.05, T=1.0, K=5)


def test_design_is_deterministic_and_in_range():
    d1 = sample_design(50, 1.0, 7)
    d2 = sample_design(50, 1.0, 7)
    assert (d1.t == d2.t).all() and (d1.x == d2.x).all()
    assert d1.t.min() >= 0.0 and d1.t.max() <= 1.0
    assert d1.x.min() >= 0.0 and d1.x.max() < 1.0
    d3 = sample_design(50, 1.0, 8)
    assert not (d3.t == d1.t).all()


def test_zero_noise_observations_equal_forward_values(rng):
    v = random_velocity(1, rng, 2.5, norm=0.5)
    design = sample_design(20, 1.0, 3)
    obs = synthesize_data(v, design, canonical_ic_pair(), 0.0, 3, CFG)
    assert (obs.values == obs.g_true).all()
    assert obs.n_data == 40


def test_noise_level_scales_residuals():
    v = radial_flow(0.4)
    design = sample_design(400, 1.0, 3)
    obs = synthesize_data(v, design, canonical_ic_pair(), 0.05, 3, CFG)
    spread = np.std(obs.values - obs.g_true)
    assert 0.04 < spread < 0.06


def test_forward_values_match_matrix_exponential_oracle(rng):
    v = random_velocity(1, rng, 2.5, norm=0.6)
    design = sample_design(6, 1.0, 11)
    cfg = SolverConfig(kappa=0.05, T=1.0, K=4)
    pair = canonical_ic_pair()
    g = forward_map(v, design, pair, cfg)
    for j in range(design.n_points):
        t, (x1, x2) = float(design.t[j]), design.x[j]
        for ic, theta0 in ((0, pair.theta1), (1, pair.theta2)):
            coeffs, modes = oracles.exact_coeffs(v, theta0, 0.05, 4, t)
            want = oracles.point_value(coeffs, modes, x1, x2)
            assert g[2 * j + ic] == pytest.approx(want, abs=5e-8)


def test_batch_forward_map_matches_singles_on_every_engine(rng):
    design = sample_design(25, 1.0, 5)
    pair = canonical_ic_pair()

    def batch_vs_singles(vs, cfg):
        G = forward_map_batch(vs, design, pair, cfg)
        for i, v in enumerate(vs):
            gi = forward_map(v, design, pair, cfg)
            assert np.abs(G[i] - gi).max() <= 1e-12

    lat2 = ModeLattice(2)
    # two coefficient directions: the span engine
    span_vs = [FourierVelocityField.from_mode_dict(
        lat2, {(1, 0): c, (0, 1): 1j * c}) for c in (0.1, -0.2, 0.3, 0.05)]
    batch_vs_singles(span_vs, CFG)
    # five directions exceed the span basis cap: the block-sparse engine
    dirs = [(1, 0), (0, 1), (1, 1), (2, 1), (1, -2)]
    block_vs = [FourierVelocityField.from_mode_dict(
        lat2, {d: 0.05 * (i + 1) for d in dirs}) for i in range(3)]
    batch_vs_singles(block_vs, CFG)
    # wider velocity lattice: the grid transform engine
    fft_vs = [random_velocity(3, rng, 2.5, norm=0.5) for _ in range(3)]
    batch_vs_singles(fft_vs, CFG)


def test_paired_rows_interleave_components(rng):
    v = radial_flow(0.3)
    design = sample_design(10, 1.0, 2)
    pair = canonical_ic_pair()
    g = forward_map(v, design, pair, CFG)
    g1 = forward_map(v, design, ICPair(pair.theta1, pair.theta1, "d"), CFG,
                     ic_mode="single", allow_degenerate=True)
    np.testing.assert_allclose(g[0::2], g1, atol=1e-12)


def test_observation_csv_round_trip_is_bit_exact(tmp_path, rng):
    v = random_velocity(1, rng, 2.5, norm=0.4)
    design = sample_design(17, 1.0, 9)
    obs = synthesize_data(v, design, canonical_ic_pair(), 0.07, 9, CFG)
    p = tmp_path / "obs.csv"
    save_observations_csv(obs, p)
    back = load_observations_csv(p)
    assert (back.values == obs.values).all()
    assert (back.g_true == obs.g_true).all()
    assert (back.design.t == obs.design.t).all()
    assert (back.design.x == obs.design.x).all()
    assert back.sigma_eta == obs.sigma_eta
    assert back.ic_mode == obs.ic_mode
    save_observations_csv(back, tmp_path / "obs2.csv")
    assert (tmp_path / "obs.csv").read_bytes() == \
        (tmp_path / "obs2.csv").read_bytes()


def test_head_truncates_the_observation_prefix(rng):
    v = radial_flow(0.2)
    design = sample_design(12, 1.0, 4)
    obs = synthesize_data(v, design, canonical_ic_pair(), 0.05, 4, CFG)
    h = obs.head(10)
    assert h.n_data == 10
    assert (h.values == obs.values[:10]).all()
    assert h.design.n_points == 5


def test_canonical_pair_spans_and_degenerate_pair_is_refused():
    rep = check_spanning(sin_x1(), sin_x2())
    assert rep.passed
    theta = symmetric_ic()
    pair = ICPair(theta, theta, label="degenerate")
    with pytest.raises(ConfigError):
        pair.require_spanning(False)
    pair.require_spanning(True)


def test_landmarks_cover_each_design_point_once():
    design = sample_design(40, 1.0, 21)
    times, pts_at = _observation_landmarks(design)
    assert (np.diff(times) > 0).all()
    seen = sorted(j for pts in pts_at.values() for j in pts)
    assert seen == list(range(40))
    for i, pts in pts_at.items():
        for j in pts:
            assert design.t[j] == times[i]
