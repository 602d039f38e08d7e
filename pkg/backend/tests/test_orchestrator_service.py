"""
Run configuration, round schedule and the end-to-end competition workflow.
"""
from datetime import date
import json

import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import ConfigError, CoverageError
from app.schemas.run import DEFAULT_ROUNDS, STRATEGIES, RunConfig
from app.services.dataset_service import slice_dataset
from app.services.orchestrator_service import (
    first_failure,
    load_zone_datasets,
    load_zone_models,
    resolve_history_years,
    run_round,
    simulate_competition,
    train_round,
)
from app.services.scenario_service import read_quantile_csv


def _payload(world, **overrides) -> dict:
    payload = json.loads(world["run_config"].read_text())
    payload.update(overrides)
    return payload


# ============================================================================
# CONFIGURATION
# ============================================================================

def test_default_round_schedule():
    assert [spec.round_id for spec in DEFAULT_ROUNDS] == [1, 2, 3, 4, 5, 6]
    assert [spec.strategy for spec in DEFAULT_ROUNDS] == ["trend", "trend", "ensemble", "ensemble", "ensemble", "trend"]
    r2, r3 = DEFAULT_ROUNDS[1], DEFAULT_ROUNDS[2]
    assert r2.data_cutoff == r3.data_cutoff == date(2016, 11, 30)
    assert r2.forecast_window == r3.forecast_window == (date(2017, 2, 1), date(2017, 2, 28))
    assert DEFAULT_ROUNDS[5].forecast_window == (date(2017, 4, 1), date(2017, 4, 30))


def test_training_windows_share_one_start(synthetic_world):
    config = RunConfig.from_file(synthetic_world["run_config"])
    assert config.training_window(config.round(1)) == (date(2014, 1, 1), date(2016, 11, 30))
    assert config.training_window(config.round(6)) == (date(2014, 1, 1), date(2017, 1, 31))
    assert config.output_dir == synthetic_world["run_config"].parent / "out"


def test_invalid_configs_are_config_errors(synthetic_world, tmp_path):
    base = synthetic_world["run_config"].parent
    with pytest.raises(ConfigError):
        RunConfig.from_payload(_payload(synthetic_world, training_years=0), base_dir=base)
    with pytest.raises(ConfigError, match="unknown zones"):
        RunConfig.from_payload(
            _payload(synthetic_world, zones=[{"zone_id": "total", "aggregate_of": ["nowhere"]}]), base_dir=base
        )
    with pytest.raises(ConfigError, match="file not found"):
        RunConfig.from_payload({"zones": [{"zone_id": "z", "path": "missing.csv"}]}, base_dir=tmp_path)
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "absent.json")

    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        RunConfig.from_file(broken)


def test_unknown_round_and_zone(synthetic_world):
    config = RunConfig.from_file(synthetic_world["run_config"])
    with pytest.raises(ConfigError):
        config.round(7)
    with pytest.raises(ConfigError):
        load_zone_datasets(config, ["zone_9"])


def test_aggregate_zone_sums_children(synthetic_world):
    payload = _payload(synthetic_world)
    payload["zones"].append({"zone_id": "total", "aggregate_of": ["zone_1", "zone_2"]})
    config = RunConfig.from_payload(payload, base_dir=synthetic_world["run_config"].parent)
    datasets = load_zone_datasets(config, ["total"])

    parts = load_zone_datasets(config)
    np.testing.assert_allclose(datasets["total"].load, parts["zone_1"].load + parts["zone_2"].load)
    assert datasets["total"].n_channels == 4


# ============================================================================
# SCENARIO YEARS
# ============================================================================

def test_history_years_resolve_against_the_truncated_history(long_history):
    history = slice_dataset(long_history, end=date(2016, 11, 30))
    years = resolve_history_years(history, (date(2017, 1, 1), date(2017, 1, 31)), range(-3, 4), 167)
    assert years == list(range(2006, 2017))

    with pytest.raises(CoverageError):
        resolve_history_years(history, (date(2017, 1, 1), date(2017, 1, 31)), range(-3, 4), 24 * 366 * 12)


# ============================================================================
# ROUNDS
# ============================================================================

def test_failing_zones_are_reported_not_raised(synthetic_world, tmp_path):
    payload = _payload(synthetic_world, training_start="2016-06-01")
    config = RunConfig.from_payload(payload, base_dir=synthetic_world["run_config"].parent)
    results = run_round(config, config.round(1), out_dir=tmp_path)

    assert len(results) == 2
    failure = first_failure(results)
    assert failure is not None
    assert failure.error == "Training error"
    assert failure.exit_code == 3


def test_train_round_writes_model_sets(synthetic_world, tmp_path):
    config = RunConfig.from_file(synthetic_world["run_config"])
    datasets = load_zone_datasets(config, ["zone_1"])
    results = train_round(config, config.round(3), datasets=datasets, out_dir=tmp_path)

    assert first_failure(results) is None
    zone_dir = tmp_path / "R3" / "zone_1"
    manifest = json.loads((zone_dir / "model.json").read_text())
    assert manifest["trend"] == {"model": "model_trend.json", "catalog": "catalog_trend.json"}

    models = load_zone_models(zone_dir)
    assert sorted(models) == ["no_trend", "trend"]
    assert len(models["trend"].models) == 24
    assert models["trend"].trend_mode == "on" and models["no_trend"].trend_mode == "off"

    catalog = json.loads((zone_dir / "catalog_no_trend.json").read_text())
    assert "trend" not in catalog
    assert set(models["no_trend"].selected_ids) <= set(catalog)
    assert "trend" in json.loads((zone_dir / "catalog_trend.json").read_text())

    with pytest.raises(ConfigError):
        load_zone_models(tmp_path)


@pytest.mark.slow
def test_rounds_two_and_three_agree_under_the_trend_strategy(synthetic_world, tmp_path):
    config = RunConfig.from_file(synthetic_world["run_config"])
    datasets = load_zone_datasets(config, ["zone_1"])
    for round_id in (2, 3):
        results = run_round(config, config.round(round_id), ["trend"], datasets, tmp_path)
        assert first_failure(results) is None

    r2 = (tmp_path / "R2" / "zone_1" / "forecast.csv").read_bytes()
    r3 = (tmp_path / "R3" / "zone_1" / "forecast.csv").read_bytes()
    assert r2 == r3


@pytest.mark.slow
def test_competition_simulation_end_to_end(synthetic_world, tmp_path):
    config = RunConfig.from_file(synthetic_world["run_config"])
    datasets = load_zone_datasets(config)

    first = simulate_competition(config, list(STRATEGIES), rounds=[1], datasets=datasets, out_dir=tmp_path / "a")
    second = simulate_competition(config, list(STRATEGIES), rounds=[1], datasets=datasets, out_dir=tmp_path / "b")

    assert not first.gaps
    assert set(first.scores) == set(STRATEGIES)
    assert first.scores["auto"][1] > 0
    assert first.submitted[1] == first.scores["trend"][1]

    for zone_id in ("zone_1", "zone_2"):
        zone_dir = tmp_path / "a" / "R1" / zone_id
        for strategy in STRATEGIES:
            forecast = read_quantile_csv(zone_dir / f"forecast_{strategy}.csv")
            assert len(forecast.grid) == 31 * 24
            assert np.all(np.diff(forecast.values, axis=1) >= 0)
            again = tmp_path / "b" / "R1" / zone_id / f"forecast_{strategy}.csv"
            assert again.read_bytes() == (zone_dir / f"forecast_{strategy}.csv").read_bytes()
        provenance = json.loads((zone_dir / "provenance.json").read_text())
        assert len(provenance["trajectories"]) == len(provenance["history_years"]) * 7

    summary_a = (tmp_path / "a" / "competition_summary.csv").read_bytes()
    assert summary_a == (tmp_path / "b" / "competition_summary.csv").read_bytes()
    summary = pd.read_csv(tmp_path / "a" / "competition_summary.csv")
    assert summary["strategy"].tolist() == ["submitted", *STRATEGIES]
    assert len(pd.read_csv(tmp_path / "a" / "scorecards.csv")) == 2 * len(STRATEGIES)
