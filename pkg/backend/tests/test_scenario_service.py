"""
Temperature shuffling, scenario forecasts and type-7 deciles.
"""
from datetime import date
import math

import numpy as np
import pytest

from app.core.exceptions import AlignmentError, ConfigError, CoverageError, DomainError
from app.schemas.data import HOURS_PER_DAY, HourlyGrid
from app.schemas.features import GridConfig
from app.schemas.models import FitStats, HourlyModelSet, LinearModel
from app.schemas.scenarios import DECILES, QuantileForecast, ScenarioProvenance, ShiftConfig
from app.services.scenario_service import (
    ensemble_average,
    forecast_scenarios,
    generate_scenarios,
    quantile_type7,
    read_quantile_csv,
    reduce_to_deciles,
    source_date,
    write_quantile_csv,
)

JULY_2017 = (date(2017, 7, 1), date(2017, 7, 31))
ALL_YEARS = list(range(2005, 2018))


def _brute_force_quantile(values, p: float) -> float:
    x = sorted(values)
    h = (len(x) - 1) * p + 1
    lower, upper = math.floor(h), math.ceil(h)
    return x[lower - 1] + (h - lower) * (x[upper - 1] - x[lower - 1])


def _one_row_grid() -> HourlyGrid:
    return HourlyGrid.from_hour_index(np.array([0]))


def _modelset(selected, coefficients, intercept: float = 100.0) -> HourlyModelSet:
    models = {
        hour: LinearModel(
            hour=hour,
            selected=list(selected),
            coefficients=list(coefficients),
            intercept=intercept,
            fit_stats=FitStats(n=100, rss=1.0, criterion=0.0),
        )
        for hour in range(1, HOURS_PER_DAY + 1)
    }
    return HourlyModelSet(
        models=models,
        window_start=date(2014, 1, 1),
        window_end=date(2016, 11, 30),
        trend_mode="off",
        grid=GridConfig(),
    )


# ============================================================================
# SHUFFLING
# ============================================================================

def test_source_date_mapping():
    assert source_date(date(2017, 1, 5), 2017, 2010, -3) == date(2010, 1, 2)
    assert source_date(date(2016, 2, 29), 2016, 2015, 0) == date(2015, 2, 28)
    assert source_date(date(2016, 2, 29), 2016, 2015, 1) == date(2015, 3, 1)
    # A window crossing New Year keeps reading consecutive source years.
    assert source_date(date(2017, 1, 1), 2016, 2010, 0) == date(2011, 1, 1)


def test_thirteen_years_and_seven_shifts_give_91_trajectories(long_history):
    config = ShiftConfig(history_years=ALL_YEARS)
    scenarios = generate_scenarios(long_history, JULY_2017, config, backfill_hours=24)

    assert len(scenarios) == 91
    assert scenarios.trajectories.shape == (91, 24 + 31 * HOURS_PER_DAY, 2)
    assert scenarios.provenance[0] == ScenarioProvenance(source_year=2005, shift_days=-3)
    assert scenarios.provenance[-1] == ScenarioProvenance(source_year=2017, shift_days=3)
    assert scenarios.forecast_grid.same_as(HourlyGrid.for_days(*JULY_2017))


def test_trajectory_reads_shifted_history_with_contiguous_backfill(long_history):
    config = ShiftConfig(history_years=[2010], day_shifts=[2])
    scenarios = generate_scenarios(long_history, JULY_2017, config, backfill_hours=5)

    origin = long_history.grid.hour_index[0]
    first = HourlyGrid.for_days(date(2010, 7, 3), date(2010, 7, 3)).hour_index[0] - origin
    np.testing.assert_array_equal(scenarios.trajectories[0], long_history.temperatures[first - 5:first + 31 * 24])


def test_unset_years_are_a_config_error(long_history):
    with pytest.raises(ConfigError):
        generate_scenarios(long_history, JULY_2017, ShiftConfig())


def test_years_outside_history_name_the_trajectory(long_history):
    with pytest.raises(CoverageError, match="year 2004, shift -3"):
        generate_scenarios(long_history, JULY_2017, ShiftConfig(history_years=[2004]))


# ============================================================================
# SCENARIO FORECASTS
# ============================================================================

def test_scenario_forecast_uses_trajectory_temperatures(long_history):
    scenarios = generate_scenarios(
        long_history, JULY_2017, ShiftConfig(history_years=[2010, 2011], day_shifts=[0]), backfill_hours=2
    )
    modelset = _modelset(["poly:temp_1:d=1", "ma:temp_1:w=3", "holiday"], [2.0, 0.5, -50.0])
    trajectories = forecast_scenarios(modelset, scenarios)

    assert trajectories.values.shape == (2, 31 * HOURS_PER_DAY)
    temps = scenarios.trajectories[1][:, 0]
    ma = np.convolve(temps, np.ones(3) / 3.0, mode="valid")
    holiday = np.zeros(31 * HOURS_PER_DAY)
    holiday[3 * HOURS_PER_DAY:4 * HOURS_PER_DAY] = 1.0
    expected = 100.0 + 2.0 * temps[2:] + 0.5 * ma - 50.0 * holiday
    np.testing.assert_allclose(trajectories.values[1], expected, rtol=1e-12)


def test_scenario_forecast_needs_enough_backfill(long_history):
    scenarios = generate_scenarios(long_history, JULY_2017, ShiftConfig(history_years=[2010], day_shifts=[0]))
    modelset = _modelset(["ma:temp_1:w=3"], [1.0])
    with pytest.raises(CoverageError):
        forecast_scenarios(modelset, scenarios)


# ============================================================================
# QUANTILES
# ============================================================================

def test_deciles_of_one_to_91_are_integral():
    forecast = reduce_to_deciles(np.arange(1, 92, dtype=np.float64)[:, None], _one_row_grid())
    assert forecast.values[0].tolist() == [10.0, 19.0, 28.0, 37.0, 46.0, 55.0, 64.0, 73.0, 82.0]
    assert forecast.column_names == ["q10", "q20", "q30", "q40", "q50", "q60", "q70", "q80", "q90"]


def test_type7_interpolates():
    assert quantile_type7([1, 2, 3, 4], 0.5) == 2.5
    assert quantile_type7([4, 1, 3, 2], 0.0) == 1.0
    assert quantile_type7([4, 1, 3, 2], 1.0) == 4.0
    assert quantile_type7([5.0], 0.3) == 5.0


def test_type7_matches_brute_force_oracle():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        values = rng.normal(size=int(rng.integers(1, 60))).tolist()
        p = float(rng.uniform())
        assert abs(quantile_type7(values, p) - _brute_force_quantile(values, p)) <= 1e-12


def test_type7_agrees_with_numpy_linear_method():
    rng = np.random.default_rng(43)
    values = rng.normal(size=(91, 50))
    forecast = reduce_to_deciles(values, HourlyGrid.from_hour_index(np.arange(50)))
    np.testing.assert_allclose(forecast.values, np.quantile(values, DECILES, axis=0).T, rtol=1e-12, atol=1e-12)


def test_type7_rejects_bad_input():
    with pytest.raises(DomainError):
        quantile_type7([], 0.5)
    with pytest.raises(DomainError):
        quantile_type7([1.0], 1.5)


def test_deciles_are_monotone_and_affine_equivariant():
    rng = np.random.default_rng(44)
    values = rng.normal(100.0, 20.0, size=(30, 200))
    grid = HourlyGrid.from_hour_index(np.arange(200))
    forecast = reduce_to_deciles(values, grid)
    shifted = reduce_to_deciles(3.0 * values + 7.0, grid)

    assert np.all(np.diff(forecast.values, axis=1) >= 0)
    np.testing.assert_allclose(shifted.values, 3.0 * forecast.values + 7.0, rtol=1e-12)


def test_ensemble_is_the_elementwise_mean():
    grid = HourlyGrid.from_hour_index(np.arange(2))
    a = QuantileForecast(grid=grid, values=np.tile(np.arange(9.0), (2, 1)))
    b = QuantileForecast(grid=grid, values=np.tile(np.arange(9.0) * 3, (2, 1)))
    np.testing.assert_array_equal(ensemble_average(a, b).values, np.tile(np.arange(9.0) * 2, (2, 1)))

    other = QuantileForecast(grid=HourlyGrid.from_hour_index(np.arange(1, 3)), values=a.values)
    with pytest.raises(AlignmentError):
        ensemble_average(a, other)


def test_decreasing_quantiles_are_rejected():
    with pytest.raises(ValueError, match="decrease"):
        QuantileForecast(grid=_one_row_grid(), values=np.arange(9.0)[::-1][None, :])


def test_quantile_csv_round_trip(tmp_path):
    grid = HourlyGrid.for_days(date(2017, 1, 1), date(2017, 1, 1))
    values = np.sort(np.random.default_rng(45).normal(500.0, 50.0, size=(24, 9)), axis=1)
    path = write_quantile_csv(QuantileForecast(grid=grid, values=values), tmp_path / "forecast.csv")

    assert path.read_text().splitlines()[0] == "timestamp,q10,q20,q30,q40,q50,q60,q70,q80,q90"
    reread = read_quantile_csv(path)
    assert reread.grid.same_as(grid)
    np.testing.assert_allclose(reread.values, values, atol=1e-6)
