import json
import math
import os

import numpy as np
import pytest

from scalarflow.cli import main
from scalarflow.observations import load_observations_csv
from scalarflow.solver import load_trajectory

KAPPA = 0.05


def _cfg(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def _run(*argv):
    return main(list(argv))


def test_defaults_lists_every_command(capsys):
    assert _run("defaults") == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"solve", "observe", "posterior", "consistency"}
    assert "kappa" in doc["solve"]
    assert doc["observe"]["n_obs"]["default"] == "(required)"


def test_solve_heat_matches_analytic_decay(tmp_path, capsys):
    cfg = _cfg(tmp_path, "solve.json",
               {"kappa": KAPPA, "T": 1.0, "K": 2, "velocity_preset": "heat",
                "theta0_preset": "sin-x1"})
    out = tmp_path / "run"
    assert _run("solve", "--config", cfg, "--out", str(out)) == 0
    traj = load_trajectory(out / "trajectory")
    final = traj.field_at(traj.n_snapshots - 1)
    decay = math.exp(-4.0 * math.pi ** 2 * KAPPA)
    xs = np.linspace(0.0, 1.0, 17, endpoint=False)
    want = decay * np.sin(2.0 * math.pi * xs)
    pts = np.stack([xs, np.full_like(xs, 0.33)], axis=1)
    assert np.abs(final.evaluate(pts) - want).max() < 1e-8


def test_solve_radial_velocity_keeps_energy_identity(tmp_path):
    cfg = _cfg(tmp_path, "solve.json",
               {"kappa": KAPPA, "T": 1.0, "K": 5,
                "velocity_preset": "radial-symmetry", "velocity_c": 1.5,
                "theta0_preset": "radial-invariant"})
    out = tmp_path / "run"
    assert _run("solve", "--config", cfg, "--out", str(out)) == 0
    table = np.genfromtxt(out / "energy_report.csv", delimiter=",", names=True)
    assert np.abs(table["residual"]).max() <= 1e-5 * table["l2_sq"][0]


def test_missing_required_key_exits_2(tmp_path, capsys):
    cfg = _cfg(tmp_path, "solve.json", {"T": 1.0})
    assert _run("solve", "--config", cfg, "--out", str(tmp_path)) == 2
    assert "kappa" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = _cfg(tmp_path, "solve.json", {"kappa": 0.1, "kapa": 0.2})
    assert _run("solve", "--config", cfg, "--out", str(tmp_path)) == 2
    assert "kapa" in capsys.readouterr().err


def test_observe_outputs_are_byte_deterministic(tmp_path, capsys):
    cfg = _cfg(tmp_path, "obs.json",
               {"kappa": KAPPA, "K": 5, "n_obs": 25, "sigma_eta": 0.05,
                "seed": 7, "velocity_preset": "stream-cos"})
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run("observe", "--config", cfg, "--out", str(a)) == 0
    assert _run("observe", "--config", cfg, "--out", str(b)) == 0
    blob = (a / "observations.csv").read_bytes()
    assert blob == (b / "observations.csv").read_bytes()
    # metadata comment + header + one row per (point, ic) sample
    assert blob.decode().count("\n") == 2 * 25 + 2
    obs = load_observations_csv(a / "observations.csv")
    assert obs.n_data == 50
    assert np.abs(obs.values - obs.g_true).max() > 0.0


def test_observe_zero_noise_reports_exact_values(tmp_path, capsys):
    cfg = _cfg(tmp_path, "obs.json",
               {"kappa": KAPPA, "K": 5, "n_obs": 10, "sigma_eta": 0.0,
                "seed": 3, "velocity_preset": "radial-symmetry"})
    out = tmp_path / "run"
    assert _run("observe", "--config", cfg, "--out", str(out)) == 0
    obs = load_observations_csv(out / "observations.csv")
    assert (obs.values == obs.g_true).all()


def test_posterior_with_no_data_reproduces_the_prior(tmp_path, capsys):
    obs_cfg = _cfg(tmp_path, "obs.json",
                   {"kappa": KAPPA, "K": 5, "n_obs": 0, "sigma_eta": 0.05,
                    "seed": 1, "velocity_preset": "heat"})
    obs_out = tmp_path / "obs"
    assert _run("observe", "--config", obs_cfg, "--out", str(obs_out)) == 0
    post_cfg = _cfg(tmp_path, "post.json",
                    {"kappa": KAPPA, "K": 5,
                     "obs_file": str(obs_out / "observations.csv"),
                     "beta": 0.6, "n_steps": 4000, "burn_in": 500,
                     "seed": 11, "quad_grid": 33})
    p1, p2 = tmp_path / "p1", tmp_path / "p2"
    assert _run("posterior", "--config", post_cfg, "--out", str(p1)) == 0
    assert _run("posterior", "--config", post_cfg, "--out", str(p2)) == 0
    assert (p1 / "chain.csv").read_bytes() == (p2 / "chain.csv").read_bytes()
    summary = json.loads((p1 / "posterior_summary.json").read_text())
    assert summary["mean_agreement_3se"] is True
    assert np.abs(summary["quadrature_mean"]).max() < 1e-12
    quad = json.loads((p1 / "quadrature.json").read_text())
    assert quad["grid_per_dim"] == 33


def test_observe_accepts_a_custom_ic_pair(tmp_path, capsys):
    from scalarflow.fields import save_field_csv
    from scalarflow.presets import sin_x1, sin_x2

    f1, f2 = tmp_path / "ic1.csv", tmp_path / "ic2.csv"
    save_field_csv(sin_x1(), f1)
    save_field_csv(sin_x2(), f2)
    base = {"kappa": KAPPA, "K": 5, "n_obs": 15, "sigma_eta": 0.05,
            "seed": 9, "velocity_preset": "stream-cos"}
    preset_cfg = _cfg(tmp_path, "a.json", base)
    custom_cfg = _cfg(tmp_path, "b.json",
                      dict(base, ic1_file=str(f1), ic2_file=str(f2)))
    a, b = tmp_path / "a", tmp_path / "b"
    assert _run("observe", "--config", preset_cfg, "--out", str(a)) == 0
    assert _run("observe", "--config", custom_cfg, "--out", str(b)) == 0
    assert (a / "observations.csv").read_bytes() == \
        (b / "observations.csv").read_bytes()
    half_cfg = _cfg(tmp_path, "c.json", dict(base, ic1_file=str(f1)))
    assert _run("observe", "--config", half_cfg, "--out", str(a)) == 2
    assert "ic2_file" in capsys.readouterr().err


def test_posterior_refuses_quadrature_beyond_four_dofs(tmp_path, capsys):
    obs_cfg = _cfg(tmp_path, "obs.json",
                   {"kappa": KAPPA, "K": 5, "n_obs": 0, "sigma_eta": 0.05,
                    "seed": 1, "velocity_preset": "heat"})
    obs_out = tmp_path / "obs"
    assert _run("observe", "--config", obs_cfg, "--out", str(obs_out)) == 0
    post_cfg = _cfg(tmp_path, "post.json",
                    {"kappa": KAPPA, "K": 5,
                     "obs_file": str(obs_out / "observations.csv"),
                     "prior_modes": [[1, 0], [0, 1], [1, 1]],
                     "beta": 0.5, "n_steps": 300, "burn_in": 50, "seed": 2})
    out = tmp_path / "run"
    assert _run("posterior", "--config", post_cfg, "--out", str(out)) == 0
    assert "4" in capsys.readouterr().err
    summary = json.loads((out / "posterior_summary.json").read_text())
    assert "quadrature_refused" in summary
    assert (out / "chain.csv").exists()
    assert not (out / "quadrature.json").exists()


def test_consistency_contraction_csv_covers_every_eps_n_pair(tmp_path):
    cfg = _cfg(tmp_path, "con.json",
               {"experiment": "contraction", "seeds": [701],
                "n_schedule": [50, 100]})
    out = tmp_path / "run"
    assert _run("consistency", "--config", cfg, "--out", str(out)) == 0
    rows = (out / "contraction.csv").read_text().strip().splitlines()
    assert rows[0] == "eps,n_obs,mass_median,dist_median"
    assert len(rows) == 1 + 3 * 2
    eps_seen = sorted({float(r.split(",")[0]) for r in rows[1:]})
    assert eps_seen == [0.05, 0.1, 0.2]


def test_consistency_cli_writes_a_record(tmp_path, capsys):
    cfg = _cfg(tmp_path, "inj.json",
               {"experiment": "injectivity", "n_schedule": [33]})
    out = tmp_path / "run"
    assert _run("consistency", "--config", cfg, "--out", str(out)) == 0
    recs = [f for f in os.listdir(out) if f.startswith("injectivity-")]
    assert len(recs) == 1
    record = json.loads((out / recs[0]).read_text())
    assert record["summaries"]["margin_ratio"] > 10.0


def test_consistency_budget_guard_exits_4(tmp_path, capsys):
    cfg = _cfg(tmp_path, "con.json",
               {"experiment": "contraction", "budget": 1})
    assert _run("consistency", "--config", cfg, "--out", str(tmp_path)) == 4
    assert "budget" in capsys.readouterr().err.lower()
