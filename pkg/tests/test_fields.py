import numpy as np
import pytest

import oracles
from scalarflow.errors import ConfigError, LatticeMismatchError
from scalarflow.fields import (FourierScalarField, FourierVelocityField,
                               ModeLattice, distance_H, load_field_csv,
                               save_field_csv, sobolev_norm)
from scalarflow.presets import random_scalar, random_velocity, sin_x1


def test_lattice_counts_and_order():
    for K in (1, 2, 5):
        lat = ModeLattice(K)
        assert lat.n_modes == (2 * K + 1) ** 2 - 1
        assert [tuple(m) for m in lat.modes] == oracles.mode_list(K)


def test_lattice_conjugation_pairs_up():
    lat = ModeLattice(3)
    ci = lat.conj_index
    assert (ci[ci] == np.arange(lat.n_modes)).all()
    assert (lat.modes[ci] == -lat.modes).all()
    # half mask picks exactly one site from each +-k pair
    assert lat.half_mask.sum() == lat.n_modes // 2
    assert not (lat.half_mask & lat.half_mask[ci]).any()


def test_lattice_rejects_negative_K_but_allows_empty():
    with pytest.raises(ConfigError):
        ModeLattice(-1)
    assert ModeLattice(0).n_modes == 0


def test_scalar_reality_enforced(rng):
    f = random_scalar(3, rng)
    assert f.reality_defect() < 1e-14
    pts = rng.random((40, 2))
    vals = f.evaluate(pts)
    assert np.isrealobj(vals)
    direct = [oracles.point_value(f.coeffs, [tuple(m) for m in f.lattice.modes],
                                  x1, x2) for x1, x2 in pts]
    np.testing.assert_allclose(vals, direct, atol=1e-12)


def test_velocity_is_divergence_free_and_matches_direct_sum(rng):
    v = random_velocity(3, rng, 2.5)
    assert v.divergence_sup() < 1e-12
    pts = rng.random((25, 2))
    uv = v.velocity_at(pts)
    direct = np.array([oracles.velocity_point_value(v, x1, x2)
                       for x1, x2 in pts])
    np.testing.assert_allclose(uv, direct, atol=1e-12)


def test_velocity_mean_is_zero(rng):
    v = random_velocity(2, rng, 2.5)
    grid = v.grid_values(64)           # (n, n, 2), components last
    assert np.abs(grid.mean(axis=(0, 1))).max() < 1e-13


def test_from_mode_dict_fills_conjugates():
    lat = ModeLattice(2)
    f = FourierScalarField.from_mode_dict(lat, {(1, 0): 0.25 - 0.5j})
    k = lat.index_of((-1, 0))
    assert f.coeffs[k] == np.conj(0.25 - 0.5j)
    v = FourierVelocityField.from_mode_dict(lat, {(1, 1): 0.3j})
    k = lat.index_of((-1, -1))
    assert v.coeffs[k] == -np.conj(0.3j)


def test_embedding_preserves_values(rng):
    f = random_scalar(2, rng)
    big = f.embed(ModeLattice(5))
    pts = rng.random((10, 2))
    np.testing.assert_allclose(f.evaluate(pts), big.evaluate(pts), atol=1e-13)
    with pytest.raises(LatticeMismatchError):
        big.embed(ModeLattice(2))


def test_sobolev_norm_matches_brute_force(rng):
    f = random_scalar(3, rng)
    for s in (0.0, 1.0, 2.0, 3.5):
        assert sobolev_norm(f, s) == pytest.approx(
            np.sqrt(oracles.sobolev_sq(f, s)), rel=1e-13)
    g = random_scalar(3, rng)
    d = distance_H(f, g, 2.0)
    assert d == pytest.approx(np.sqrt(oracles.sobolev_sq(f - g, 2.0)),
                              rel=1e-13)


def test_field_csv_round_trip_is_bit_exact(tmp_path, rng):
    for field in (random_scalar(3, rng), random_velocity(2, rng, 3.0)):
        p = tmp_path / "f.csv"
        save_field_csv(field, p)
        back = load_field_csv(p)
        assert type(back) is type(field)
        assert back.lattice.K == field.lattice.K
        assert (back.coeffs == field.coeffs).all()


def test_sup_abs_bounds_point_values(rng):
    f = random_scalar(2, rng)
    pts = rng.random((200, 2))
    assert f.evaluate(pts).max() <= f.sup_abs() + 1e-12


def test_sin_preset_is_the_plain_wave():
    f = sin_x1()
    x = np.array([[0.25, 0.1], [0.8, 0.33]])
    np.testing.assert_allclose(f.evaluate(x), np.sin(2 * np.pi * x[:, 0]),
                               atol=1e-14)
