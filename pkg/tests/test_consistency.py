import copy

import pytest

from scalarflow.consistency import (compare_records, load_record, rerun,
                                    run_experiment, save_record)
from scalarflow.errors import BudgetExceededError, ConfigError

FAST_INJ = {"schedule": {"time_grid": 33}}


def test_record_save_load_round_trip(tmp_path):
    rec = run_experiment("injectivity", **FAST_INJ)
    path = tmp_path / "rec.json"
    save_record(rec, path)
    back = load_record(path)
    assert back.experiment_id == rec.experiment_id
    assert back.kind == "injectivity"
    assert isinstance(back.seeds, tuple)
    cmp = compare_records(rec, back)
    assert cmp["layout_match"] and cmp["exact_match"]
    assert cmp["max_float_diff"] == 0.0


def test_experiment_id_depends_only_on_inputs():
    a = run_experiment("injectivity", **FAST_INJ)
    b = run_experiment("injectivity", **FAST_INJ)
    c = run_experiment("injectivity", schedule={"time_grid": 65})
    assert a.experiment_id == b.experiment_id
    assert a.experiment_id != c.experiment_id


def test_rerun_reproduces_summaries_exactly():
    rec = run_experiment("injectivity", **FAST_INJ)
    again = rerun(rec)
    cmp = compare_records(rec, again)
    assert cmp["exact_match"]
    assert cmp["max_float_diff"] == 0.0


def test_compare_records_flags_value_and_layout_drift():
    rec = run_experiment("injectivity", **FAST_INJ)
    bumped = copy.deepcopy(rec)
    bumped.summaries["min_pair_distance"] += 1e-7
    cmp = compare_records(rec, bumped)
    assert cmp["layout_match"]
    assert cmp["max_float_diff"] == pytest.approx(1e-7, rel=1e-3)
    broken = copy.deepcopy(rec)
    del broken.summaries["margin_ratio"]
    cmp = compare_records(rec, broken)
    assert not cmp["layout_match"]
    assert cmp["max_float_diff"] == float("inf")


def test_unknown_keys_and_kinds_are_rejected():
    with pytest.raises(ConfigError, match="nope"):
        run_experiment("illposedness", config={"nope": 1})
    with pytest.raises(ConfigError, match="n_obss"):
        run_experiment("illposedness", schedule={"n_obss": 10})
    with pytest.raises(ConfigError, match="unknown experiment kind"):
        run_experiment("does-not-exist")
    with pytest.raises(ConfigError, match="seed"):
        run_experiment("illposedness", seeds=())


def test_contraction_guards_eps_and_budget():
    with pytest.raises(ConfigError, match="eps_grid"):
        run_experiment("contraction", config={"eps": 0.33}, seeds=(1,))
    with pytest.raises(BudgetExceededError):
        run_experiment("contraction", config={"max_node_landings": 10},
                       seeds=(1,))


def test_illposedness_smoke_run():
    rec = run_experiment("illposedness", schedule={"n_obs": 400})
    s = rec.summaries
    assert s["coincidence_sup"] <= 1e-8
    assert s["tv_single_ic_to_prior"] <= 0.02
    assert s["mass_near_cstar_two_ic"] >= 0.9
    lo, hi = s["single_ic_weight_range"]
    assert hi - lo <= 1e-12
