"""
Scenario Service - temperature shuffling, scenario forecasts and type-7 deciles.
"""
from datetime import date, timedelta
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union
import calendar
import json
import logging
import math

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.exceptions import AlignmentError, ConfigError, CoverageError, DomainError
from app.schemas.data import HOURS_PER_DAY, HourlyGrid, ZoneDataset
from app.schemas.models import HourlyModelSet
from app.schemas.scenarios import (
    DECILES,
    LoadTrajectories,
    QuantileForecast,
    ScenarioProvenance,
    ScenarioSet,
    ShiftConfig,
)
from app.services.calendar_service import holiday_flags
from app.services.model_service import predict

logger = logging.getLogger(__name__)

_EPS = np.finfo(np.float64).eps


# ============================================================================
# SHUFFLING
# ============================================================================

def source_date(target: date, first_year: int, history_year: int, shift_days: int) -> date:
    """
    Historical date read for ``target`` by trajectory (history_year, shift_days).

    The window's first year maps to ``history_year``; Feb 29 falls back to
    Feb 28 in non-leap source years. The shift then moves along the continuous
    historical calendar.
    """
    year = history_year + (target.year - first_year)
    day = target.day
    if target.month == 2 and day == 29 and not calendar.isleap(year):
        day = 28
    return date(year, target.month, day) + timedelta(days=shift_days)


def source_hour_index(target_grid: HourlyGrid, first_year: int, history_year: int, shift_days: int) -> np.ndarray:
    """Continuous hour index in the historical record read for each row of ``target_grid``."""
    epoch = date(1970, 1, 1)
    days, inverse = np.unique(target_grid.dates, return_inverse=True)
    mapped = np.array(
        [(source_date(day.astype(date), first_year, history_year, shift_days) - epoch).days for day in days],
        dtype=np.int64,
    )
    source_days = mapped[inverse.ravel()]
    return source_days * HOURS_PER_DAY + (target_grid.hours - 1)


def generate_scenarios(
    history: ZoneDataset,
    window: Tuple[date, date],
    config: ShiftConfig,
    backfill_hours: int = 0,
) -> ScenarioSet:
    """
    Build one temperature trajectory per (history year, day shift).

    Every forecast timestamp reads the historical value at the same month, day
    and hour of the mapped source year, shifted by ``d`` days. Backfill rows
    are the hours immediately preceding the first mapped hour in the record.

    Args:
        history: Normalized zone data whose temperature channels are reused
        window: First and last forecast date
        config: Source years and day shifts
        backfill_hours: Hours of history to prepend for moving averages

    Returns:
        ScenarioSet with K = |history_years| x |day_shifts| trajectories

    Raises:
        ConfigError: If no history years are configured
        CoverageError: If a trajectory reads outside the history
    """
    if not config.history_years:
        raise ConfigError("scenario generation needs at least one history year")
    if backfill_hours < 0:
        raise ConfigError("backfill_hours must be non-negative")
    if len(history) == 0 or not history.grid.is_contiguous():
        raise CoverageError(f"zone {history.zone_id} history must be a contiguous hourly record")

    start, end = window
    forecast_grid = HourlyGrid.for_days(start, end)
    target_index = np.concatenate([
        forecast_grid.hour_index[0] - np.arange(backfill_hours, 0, -1),
        forecast_grid.hour_index,
    ])
    grid = HourlyGrid.from_hour_index(target_index)
    origin = int(history.grid.hour_index[0])
    n_history = len(history)

    trajectories = []
    provenance = []
    for history_year in config.history_years:
        for shift in config.day_shifts:
            source = source_hour_index(forecast_grid, start.year, history_year, shift)
            source = np.concatenate([source[0] - np.arange(backfill_hours, 0, -1), source])
            positions = source - origin
            if positions.min() < 0 or positions.max() >= n_history:
                raise CoverageError(
                    f"trajectory (year {history_year}, shift {shift:+d}) reads "
                    f"{HourlyGrid.from_hour_index(source[[0, -1]]).labels()} outside zone "
                    f"{history.zone_id} history {history.grid.label(0)}..{history.grid.label(n_history - 1)}"
                )
            trajectories.append(history.temperatures[positions])
            provenance.append(ScenarioProvenance(source_year=history_year, shift_days=shift))

    logger.info(
        f"Zone {history.zone_id}: generated {len(provenance)} temperature scenarios for {start}..{end} "
        f"({len(config.history_years)} years x {len(config.day_shifts)} shifts, {backfill_hours}h backfill)"
    )
    return ScenarioSet(
        grid=grid,
        backfill_hours=backfill_hours,
        trajectories=np.stack(trajectories),
        provenance=provenance,
    )


def forecast_scenarios(
    modelset: HourlyModelSet,
    scenarios: ScenarioSet,
    holiday: Optional[np.ndarray] = None,
) -> LoadTrajectories:
    """
    Run every scenario through ``modelset``.

    Calendar features come from the real forecast timestamps; only
    temperature-derived features read the scenario trajectory.

    Args:
        modelset: Trained hourly models
        scenarios: Temperature trajectories with backfill
        holiday: Holiday flags for the forecast rows (default: US federal calendar)

    Raises:
        CoverageError: If the scenarios carry too little backfill
    """
    forecast_grid = scenarios.forecast_grid
    if holiday is None:
        holiday = holiday_flags(forecast_grid)
    holiday = np.asarray(holiday, dtype=np.float64)
    if holiday.shape != (len(forecast_grid),):
        raise AlignmentError("holiday flags must align to the forecast window")
    padded = np.concatenate([np.zeros(scenarios.backfill_hours), holiday])

    values = np.stack([
        predict(modelset, forecast_grid, scenarios.exog(k, padded)).values for k in range(len(scenarios))
    ])
    return LoadTrajectories(grid=forecast_grid, values=values, provenance=scenarios.provenance)


# ============================================================================
# QUANTILES
# ============================================================================

def _type7_position(n: int, p: float) -> Tuple[int, float]:
    """0-based lower order statistic and interpolation weight for level p."""
    h = (n - 1) * p + 1
    nearest = round(h)
    if abs(h - nearest) <= 4 * _EPS * h:
        h = float(nearest)
    j = math.floor(h)
    return j - 1, h - j


def _check_level(p: float):
    if not (0.0 <= p <= 1.0):
        raise DomainError(f"quantile level must lie in [0, 1], got {p}")


def quantile_type7(values: Sequence[float], p: float) -> float:
    """
    Linear-interpolation sample quantile with h = (n - 1)p + 1.

    Raises:
        DomainError: If values is empty or p lies outside [0, 1]
    """
    _check_level(p)
    x = np.sort(np.asarray(values, dtype=np.float64))
    if x.size == 0:
        raise DomainError("quantile of an empty sample")
    j, gamma = _type7_position(x.size, p)
    if gamma == 0.0:
        return float(x[j])
    return float(x[j] + gamma * (x[j + 1] - x[j]))


def reduce_to_deciles(
    trajectories: Union[LoadTrajectories, np.ndarray],
    grid: Optional[HourlyGrid] = None,
    levels: Tuple[float, ...] = DECILES,
) -> QuantileForecast:
    """
    Per-timestamp type-7 quantiles across scenarios.

    Raises:
        AlignmentError: If a raw array does not match ``grid``
    """
    if isinstance(trajectories, LoadTrajectories):
        grid = trajectories.grid
        values = trajectories.values
    else:
        values = np.asarray(trajectories, dtype=np.float64)
        if grid is None or values.ndim != 2 or values.shape[1] != len(grid):
            raise AlignmentError("trajectories must be a K x rows matrix aligned to the grid")
    if values.shape[0] < 1:
        raise DomainError("at least one trajectory is required")
    for p in levels:
        _check_level(p)

    ordered = np.sort(values, axis=0)
    n = ordered.shape[0]
    columns = []
    for p in levels:
        j, gamma = _type7_position(n, p)
        if gamma == 0.0:
            columns.append(ordered[j])
        else:
            columns.append(ordered[j] + gamma * (ordered[j + 1] - ordered[j]))
    result = np.maximum.accumulate(np.column_stack(columns), axis=1) if columns else np.empty((len(grid), 0))
    return QuantileForecast(grid=grid, levels=tuple(levels), values=result)


def ensemble_average(a: QuantileForecast, b: QuantileForecast) -> QuantileForecast:
    """Elementwise mean of two quantile forecasts on the same grid and levels."""
    if not a.grid.same_as(b.grid) or a.levels != b.levels:
        raise AlignmentError("ensemble members must share timestamps and quantile levels")
    return QuantileForecast(grid=a.grid, levels=a.levels, values=(a.values + b.values) / 2.0)


# ============================================================================
# OUTPUT
# ============================================================================

def write_quantile_csv(
    forecast: QuantileForecast,
    path: Union[str, Path],
    precision: Optional[int] = None,
) -> Path:
    """Write ``timestamp,q10,...,q90`` with fixed decimal precision."""
    precision = settings.QUANTILE_PRECISION if precision is None else precision
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(forecast.values, columns=forecast.column_names)
    frame.insert(0, "timestamp", forecast.grid.labels())
    frame.to_csv(path, index=False, float_format=f"%.{precision}f")
    return path


def read_quantile_csv(path: Union[str, Path]) -> QuantileForecast:
    """Read a file produced by ``write_quantile_csv``."""
    frame = pd.read_csv(path, dtype={"timestamp": str})
    stamps = frame["timestamp"].str.split(" ", expand=True)
    grid = HourlyGrid(
        dates=stamps[0].to_numpy().astype("datetime64[D]"),
        hours=stamps[1].str.slice(0, 2).astype(int).to_numpy(),
    )
    levels = tuple(int(name[1:]) / 100 for name in frame.columns[1:])
    return QuantileForecast(grid=grid, levels=levels, values=frame.iloc[:, 1:].to_numpy(dtype=np.float64))


def provenance_payload(scenarios: ScenarioSet, config: ShiftConfig) -> dict:
    return {
        "history_years": list(config.history_years or []),
        "day_shifts": list(config.day_shifts),
        "backfill_hours": scenarios.backfill_hours,
        "forecast_start": str(scenarios.forecast_grid.first_date),
        "forecast_end": str(scenarios.forecast_grid.last_date),
        "trajectories": [entry.model_dump() for entry in scenarios.provenance],
    }


def write_provenance(scenarios: ScenarioSet, config: ShiftConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(provenance_payload(scenarios, config), indent=2))
    return path
