"""
Least squares, forward subset selection and hourly model sets.
"""
from datetime import date
from itertools import combinations
import math

import numpy as np
import pandas as pd
import pytest

from app.core.exceptions import CoverageError, InsufficientDataError, TrainingError
from app.schemas.data import HourlyGrid
from app.schemas.features import DesignMatrix, FeatureCatalog, FeatureSpec, GridConfig
from app.schemas.models import FitStats, HourlyModelSet, LinearModel, SelectionConfig
from app.schemas.run import SyntheticConfig
from app.services.model_service import (
    fit_ols,
    load_model_set,
    predict,
    required_backfill,
    save_model_set,
    select_subset,
    train_hourly,
    trend_summary,
)
from app.services.synthetic_service import generate_zone

CANDIDATE_IDS = [
    "holiday",
    "dow:mon", "dow:tue", "dow:wed", "dow:thu", "dow:fri", "dow:sat", "dow:sun",
    "month:jan", "month:feb", "month:mar", "month:apr",
]

TRAINING_WINDOW = (date(2014, 1, 1), date(2015, 12, 31))


def _catalog(ids, trend_mode="off") -> FeatureCatalog:
    return FeatureCatalog(
        specs=tuple(FeatureSpec.parse(i) for i in ["intercept", *ids]),
        grid=GridConfig(),
        trend_mode=trend_mode,
        n_channels=1,
    )


def _design(ids, rows: np.ndarray) -> DesignMatrix:
    grid = HourlyGrid.from_hour_index(np.arange(rows.shape[0]))
    return DesignMatrix(column_ids=tuple(ids), rows=rows, grid=grid)


def _sparse_instance(seed: int):
    """n=500, 10-12 candidates, all but three of them in the generator, noise sd 0.01."""
    rng = np.random.default_rng(seed)
    n_candidates = 10 + seed % 3
    ids = CANDIDATE_IDS[:n_candidates]
    X = rng.normal(size=(500, n_candidates))
    truth = sorted(rng.choice(n_candidates, size=n_candidates - 3, replace=False).tolist())
    beta = rng.uniform(0.5, 2.0, size=len(truth)) * rng.choice([-1.0, 1.0], size=len(truth))
    y = 3.0 + X[:, truth] @ beta + rng.normal(0.0, 0.01, size=500)
    return ids, X, y, {ids[j] for j in truth}


def _exhaustive_best(X: np.ndarray, y: np.ndarray) -> float:
    n, p = X.shape
    penalty = math.log(n)
    best = math.inf
    for k in range(p + 1):
        for subset in combinations(range(p), k):
            design = np.column_stack([np.ones(n), X[:, list(subset)]])
            coef, *_ = np.linalg.lstsq(design, y, rcond=None)
            residual = y - design @ coef
            best = min(best, n * math.log(residual @ residual / n) + penalty * k)
    return best


# ============================================================================
# LEAST SQUARES
# ============================================================================

def test_ols_residuals_are_orthogonal_to_columns():
    rng = np.random.default_rng(0)
    for _ in range(20):
        X = rng.normal(size=(200, 6))
        y = rng.normal(size=200)
        fit = fit_ols(X, y)
        residual = y - fit.intercept - X @ fit.coefficients
        assert np.max(np.abs(X.T @ residual)) < 1e-8
        assert abs(residual.sum()) < 1e-8
        assert fit.rss == pytest.approx(residual @ residual)


def test_ols_recovers_noiseless_targets():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(100, 4))
    beta = np.array([1.5, -2.0, 0.0, 4.0])
    fit = fit_ols(X, 7.0 + X @ beta)
    assert fit.rss < 1e-9
    np.testing.assert_allclose(fit.coefficients, beta, atol=1e-9)
    assert fit.intercept == pytest.approx(7.0)


def test_ols_drops_duplicated_and_constant_columns():
    rng = np.random.default_rng(2)
    base = rng.normal(size=(50, 2))
    X = np.column_stack([base[:, 0], base[:, 1], base[:, 0], np.full(50, 3.0)])
    fit = fit_ols(X, base @ np.array([1.0, 2.0]))
    assert fit.dropped == (2, 3)
    assert fit.coefficients[2] == 0.0 and fit.coefficients[3] == 0.0
    np.testing.assert_allclose(fit.coefficients[:2], [1.0, 2.0], atol=1e-9)


def test_ols_needs_more_samples_than_parameters():
    with pytest.raises(InsufficientDataError):
        fit_ols(np.ones((3, 3)), np.ones(3))


# ============================================================================
# SUBSET SELECTION
# ============================================================================

def test_selection_recovers_sparse_generators_and_never_beats_exhaustive_search():
    recovered = 0
    for seed in range(50):
        ids, X, y, truth = _sparse_instance(seed)
        model = select_subset(_catalog(ids), _design(ids, X), y, SelectionConfig())
        recovered += set(model.selected) == truth
        assert model.fit_stats.criterion >= _exhaustive_best(X, y) - 1e-6
    assert recovered >= 45


def test_criterion_path_is_strictly_decreasing():
    ids, X, y, _ = _sparse_instance(7)
    model = select_subset(_catalog(ids), _design(ids, X), y, SelectionConfig())
    path = model.fit_stats.criterion_path
    assert len(path) == len(model.selected) + 1
    assert np.all(np.diff(path) < 0)


def test_selection_is_invariant_to_catalog_order():
    ids, X, y, _ = _sparse_instance(4)
    forward = select_subset(_catalog(ids), _design(ids, X), y, SelectionConfig())
    reversed_ids = ids[::-1]
    backward = select_subset(_catalog(reversed_ids), _design(reversed_ids, X[:, ::-1]), y, SelectionConfig())
    assert set(forward.selected) == set(backward.selected)
    for feature_id in forward.selected:
        assert backward.coefficient(feature_id) == pytest.approx(forward.coefficient(feature_id), abs=1e-8)


def test_pure_noise_selects_almost_nothing():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(500, len(CANDIDATE_IDS)))
    model = select_subset(_catalog(CANDIDATE_IDS), _design(CANDIDATE_IDS, X), rng.normal(size=500), SelectionConfig())
    assert len(model.selected) <= 3


def test_constant_response_selects_nothing():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(100, 4))
    ids = CANDIDATE_IDS[:4]
    model = select_subset(_catalog(ids), _design(ids, X), np.full(100, 7.0), SelectionConfig())
    assert model.selected == []
    assert model.intercept == pytest.approx(7.0)


def test_feature_cap_is_respected():
    ids, X, y, _ = _sparse_instance(0)
    model = select_subset(_catalog(ids), _design(ids, X), y, SelectionConfig(max_features=2))
    assert len(model.selected) == 2


def test_trend_is_forced_when_mode_is_on():
    rng = np.random.default_rng(8)
    ids = ["dow:mon", "trend"]
    X = rng.normal(size=(200, 2))
    y = 2.0 * X[:, 0] + rng.normal(size=200)
    model = select_subset(_catalog(ids, trend_mode="on"), _design(ids, X), y, SelectionConfig())
    assert model.selected[0] == "trend"
    assert "dow:mon" in model.selected


# ============================================================================
# HOURLY MODEL SETS
# ============================================================================

def test_trend_modes(three_year_zone, small_grid_config):
    off = train_hourly(three_year_zone, TRAINING_WINDOW, small_grid_config, trend_mode="off")
    on = train_hourly(three_year_zone, TRAINING_WINDOW, small_grid_config, trend_mode="on")

    assert sorted(off.models) == list(range(1, 25))
    assert all("trend" not in model.selected for model in off.models.values())
    assert all(model.selected[0] == "trend" for model in on.models.values())
    assert all(value is not None for value in trend_summary(on).values())
    assert all(value is None for value in trend_summary(off).values())


def test_trend_is_suppressed_on_trend_free_data(small_grid_config):
    clean_seeds = 0
    for seed in range(20):
        zone = generate_zone(SyntheticConfig(seed=seed, years=3, start_year=2013), 0)
        modelset = train_hourly(zone, TRAINING_WINDOW, small_grid_config, trend_mode="auto")
        clean_seeds += all(value is None for value in trend_summary(modelset).values())
    assert clean_seeds >= 19


def test_prediction_tracks_in_span_load(three_year_zone, small_grid_config):
    modelset = train_hourly(three_year_zone, TRAINING_WINDOW, small_grid_config, trend_mode="off")
    grid = HourlyGrid.for_days(date(2015, 6, 1), date(2015, 6, 30))
    forecast = predict(modelset, grid, three_year_zone.exog())

    rows = grid.hour_index - three_year_zone.grid.hour_index[0]
    error = forecast.values - three_year_zone.load[rows]
    assert np.mean(np.abs(error)) < 30.0


def test_required_backfill_follows_selected_windows(three_year_zone, small_grid_config):
    modelset = train_hourly(three_year_zone, TRAINING_WINDOW, small_grid_config, trend_mode="off")
    expected = 23 if "ma:temp_1:w=24" in modelset.selected_ids else 0
    assert required_backfill(modelset) == expected


def test_model_set_json_round_trip(three_year_zone, small_grid_config, tmp_path):
    modelset = train_hourly(three_year_zone, TRAINING_WINDOW, small_grid_config, trend_mode="on")
    loaded = load_model_set(save_model_set(modelset, tmp_path / "model.json"))
    assert loaded == modelset
    assert loaded.trained_window == TRAINING_WINDOW


def test_short_window_is_a_training_error(three_year_zone, small_grid_config):
    with pytest.raises(TrainingError):
        train_hourly(three_year_zone, (date(2014, 1, 1), date(2014, 6, 30)), small_grid_config)


def test_window_outside_data_is_a_coverage_error(three_year_zone, small_grid_config):
    with pytest.raises(CoverageError):
        train_hourly(three_year_zone, (date(2015, 1, 1), date(2016, 12, 31)), small_grid_config)


def _handmade_modelset() -> HourlyModelSet:
    """Intercept 100 * hour everywhere; hour 2 also carries 2 * temp_1."""
    models = {
        hour: LinearModel(
            hour=hour,
            selected=["poly:temp_1:d=1"] if hour == 2 else [],
            coefficients=[2.0] if hour == 2 else [],
            intercept=100.0 * hour,
            fit_stats=FitStats(n=10, rss=0.0, criterion=0.0),
        )
        for hour in range(1, 25)
    }
    return HourlyModelSet(
        models=models,
        window_start=date(2014, 1, 1),
        window_end=date(2015, 12, 31),
        trend_mode="off",
        grid=GridConfig(),
    )


def test_predict_routes_each_timestamp_to_its_hour(three_year_zone):
    grid = HourlyGrid.for_days(date(2015, 6, 1), date(2015, 6, 2))
    forecast = predict(_handmade_modelset(), grid, three_year_zone.exog())

    rows = grid.hour_index - three_year_zone.grid.hour_index[0]
    temp = three_year_zone.temperatures[rows, 0]
    expected = 100.0 * grid.hours + np.where(grid.hours == 2, 2.0 * temp, 0.0)
    np.testing.assert_allclose(forecast.values, expected)
    assert forecast.values[0] != forecast.values[1]


def _noiseless_zone(zone):
    calendar = pd.DatetimeIndex(zone.grid.dates)
    t = zone.temperatures[:, 0]
    load = 500.0 + 3.0 * t + 0.02 * t ** 2 + 40.0 * (calendar.dayofweek.to_numpy() >= 5)
    return zone.model_copy(update={"load": np.asarray(load, dtype=np.float64)})


def test_prediction_is_exact_on_noiseless_in_span_load(three_year_zone, small_grid_config):
    zone = _noiseless_zone(three_year_zone)
    modelset = train_hourly(zone, TRAINING_WINDOW, small_grid_config, trend_mode="off")
    grid = HourlyGrid.for_days(date(2015, 3, 1), date(2015, 3, 14))
    forecast = predict(modelset, grid, zone.exog())

    rows = grid.hour_index - zone.grid.hour_index[0]
    np.testing.assert_allclose(forecast.values, zone.load[rows], atol=1e-6)


def test_constant_hour_gets_an_intercept_only_model(three_year_zone, small_grid_config):
    load = three_year_zone.load.copy()
    load[three_year_zone.grid.hours == 5] = 777.0
    zone = three_year_zone.model_copy(update={"load": load})

    modelset = train_hourly(zone, TRAINING_WINDOW, small_grid_config, trend_mode="off")
    assert modelset.models[5].selected == []
    assert modelset.models[5].intercept == pytest.approx(777.0)
    assert modelset.models[6].selected
