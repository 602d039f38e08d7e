"""
Feature Service - candidate catalog generation and design-matrix materialization.
"""
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union
import json
import logging

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.exceptions import ConfigError, CoverageError
from app.schemas.data import ExogenousInputs, HourlyGrid, ZoneDataset
from app.schemas.features import (
    DOW_NAMES,
    HOLIDAY_ID,
    INTERCEPT_ID,
    MONTH_NAMES,
    TREND_ID,
    DesignMatrix,
    FeatureCatalog,
    FeatureSpec,
    GridConfig,
    TrendMode,
    interaction_id,
)

logger = logging.getLogger(__name__)

DAYS_PER_YEAR = 365.25
HOURS_PER_WEEK = 168


def fourier_pair(position, harmonic: int):
    """
    (sin(2π·harmonic·position), cos(2π·harmonic·position)).

    Accepts a scalar or an array of positions in [0, 1).
    """
    angle = 2.0 * np.pi * harmonic * np.asarray(position, dtype=np.float64)
    sin, cos = np.sin(angle), np.cos(angle)
    if np.ndim(angle) == 0:
        return float(sin), float(cos)
    return sin, cos


# ============================================================================
# CATALOG
# ============================================================================

def _channel_count(source: Union[ZoneDataset, ExogenousInputs, int]) -> int:
    if isinstance(source, int):
        return source
    return source.n_channels


def build_catalog(
    source: Union[ZoneDataset, ExogenousInputs, int],
    grid: GridConfig,
    trend_mode: TrendMode = "on",
) -> FeatureCatalog:
    """
    Enumerate the candidate transformations for a zone.

    Args:
        source: Dataset (or channel count) whose temperature channels are expanded
        grid: Parameter ranges
        trend_mode: 'off' leaves the trend feature out of the catalog

    Returns:
        FeatureCatalog in deterministic order

    Raises:
        ConfigError: If the grid defines no temperature-derived family
    """
    n_channels = _channel_count(source)
    if not grid.poly_degrees and not grid.ma_windows:
        raise ConfigError("feature grid is empty: configure polynomial degrees or moving-average windows")
    if n_channels < 1:
        raise ConfigError("at least one temperature channel is required")

    ids = [INTERCEPT_ID]
    ids += [f"dow:{name}" for name in DOW_NAMES]
    ids += [f"month:{name}" for name in MONTH_NAMES]
    ids.append(HOLIDAY_ID)
    for period, count in (("yearly", grid.yearly_harmonics), ("weekly", grid.weekly_harmonics)):
        for k in range(1, count + 1):
            ids += [f"fourier:{period}:sin:k={k}", f"fourier:{period}:cos:k={k}"]

    channels = range(1, n_channels + 1)
    ids += [f"poly:temp_{c}:d={d}" for c in channels for d in grid.poly_degrees]
    ids += [f"ma:temp_{c}:w={w}" for c in channels for w in grid.ma_windows]

    levels = {"month": MONTH_NAMES, "dow": DOW_NAMES}
    for c in channels:
        for d in grid.interaction_degrees:
            for family in grid.interactions:
                ids += [interaction_id(f"poly:temp_{c}:d={d}", f"{family}:{name}") for name in levels[family]]

    if trend_mode != "off":
        ids.append(TREND_ID)

    catalog = FeatureCatalog(
        specs=tuple(FeatureSpec.parse(i) for i in ids),
        grid=grid,
        trend_mode=trend_mode,
        n_channels=n_channels,
    )
    logger.debug(f"Built catalog with {len(catalog)} specs ({n_channels} channels, trend_mode={trend_mode})")
    return catalog


def catalog_size(grid: GridConfig, n_channels: int, trend_mode: TrendMode = "on") -> int:
    """Closed-form size of ``build_catalog`` for the same arguments."""
    calendar = 1 + len(DOW_NAMES) + len(MONTH_NAMES) + 1
    fourier = 2 * grid.yearly_harmonics + 2 * grid.weekly_harmonics
    temperature = n_channels * (len(grid.poly_degrees) + len(grid.ma_windows))
    levels = (len(MONTH_NAMES) if "month" in grid.interactions else 0) + (
        len(DOW_NAMES) if "dow" in grid.interactions else 0
    )
    interactions = n_channels * len(grid.interaction_degrees) * levels
    return calendar + fourier + temperature + interactions + (trend_mode != "off")


def catalog_ids_json(catalog: FeatureCatalog) -> str:
    return json.dumps(catalog.ids, indent=2)


# ============================================================================
# MATERIALIZATION
# ============================================================================

class _Evaluator:
    """Evaluates specs for one (timestamps, exog) pair, caching calendar columns."""

    def __init__(self, grid: HourlyGrid, exog: ExogenousInputs, positions: np.ndarray, trend_base_year: int):
        self.grid = grid
        self.exog = exog
        self.positions = positions
        self.trend_base_year = trend_base_year

    @cached_property
    def _calendar(self) -> pd.DatetimeIndex:
        return pd.DatetimeIndex(self.grid.dates)

    @cached_property
    def dow(self) -> np.ndarray:
        return self._calendar.dayofweek.to_numpy()

    @cached_property
    def month(self) -> np.ndarray:
        return self._calendar.month.to_numpy() - 1

    @cached_property
    def year(self) -> np.ndarray:
        return self._calendar.year.to_numpy()

    @cached_property
    def yearly_position(self) -> np.ndarray:
        return (self._calendar.dayofyear.to_numpy() - 1) / DAYS_PER_YEAR

    @cached_property
    def weekly_position(self) -> np.ndarray:
        return (self.dow * 24 + self.grid.hours - 1) / HOURS_PER_WEEK

    def _temperature(self, channel: int) -> np.ndarray:
        if channel > self.exog.n_channels:
            raise CoverageError(
                f"feature needs temperature channel {channel}, exogenous inputs have {self.exog.n_channels}"
            )
        return self.exog.temperatures[:, channel - 1]

    def evaluate(self, spec: FeatureSpec) -> np.ndarray:
        n = len(self.grid)
        if spec.family == "intercept":
            return np.ones(n)
        if spec.family == "trend":
            return (self.year - self.trend_base_year + 1).astype(np.float64)
        if spec.family == "holiday":
            return self.exog.holiday[self.positions].astype(np.float64)
        if spec.family == "dow":
            return (self.dow == spec.level).astype(np.float64)
        if spec.family == "month":
            return (self.month == spec.level).astype(np.float64)
        if spec.family == "fourier":
            position = self.yearly_position if spec.period == "yearly" else self.weekly_position
            sin, cos = fourier_pair(position, spec.harmonic)
            return sin if spec.function == "sin" else cos
        if spec.family == "poly":
            return self._temperature(spec.channel)[self.positions] ** spec.degree
        if spec.family == "ma":
            return self._moving_average(spec)
        if spec.family == "ix":
            return self.evaluate(spec.left) * self.evaluate(spec.right)
        raise ValueError(f"cannot evaluate feature {spec.id!r}")

    def _moving_average(self, spec: FeatureSpec) -> np.ndarray:
        window = spec.window
        series = self._temperature(spec.channel)
        if len(self.positions) == 0:
            return np.zeros(0)
        earliest = int(np.argmin(self.positions))
        if self.positions[earliest] - (window - 1) < 0:
            raise CoverageError(
                f"feature {spec.id} needs {window - 1} hours of backfill before "
                f"{self.grid.label(earliest)}; exogenous inputs start at {self.exog.grid.label(0)}"
            )
        # Per-row gather keeps each mean independent of the other rows requested.
        window_rows = self.positions[:, None] + np.arange(1 - window, 1)
        return series[window_rows].mean(axis=1)


def _locate(grid: HourlyGrid, exog: ExogenousInputs) -> np.ndarray:
    if not exog.grid.is_contiguous():
        raise CoverageError("exogenous inputs must lie on a contiguous hourly grid")
    if len(grid) == 0:
        return np.zeros(0, dtype=np.int64)
    if len(exog.grid) == 0:
        raise CoverageError("exogenous inputs are empty")
    positions = grid.hour_index - exog.grid.hour_index[0]
    outside = (positions < 0) | (positions >= len(exog.grid))
    if outside.any():
        row = int(np.flatnonzero(outside)[0])
        raise CoverageError(
            f"timestamp {grid.label(row)} lies outside exogenous inputs "
            f"{exog.grid.label(0)}..{exog.grid.label(len(exog.grid) - 1)}"
        )
    return positions


def materialize(
    specs: Sequence[Union[FeatureSpec, str]],
    grid: HourlyGrid,
    exog: ExogenousInputs,
    trend_base_year: Optional[int] = None,
) -> DesignMatrix:
    """
    Evaluate ``specs`` at every timestamp of ``grid``.

    Calendar features read the timestamps themselves; temperature and holiday
    features read ``exog``. Moving averages are trailing means over the
    preceding ``w`` hours including the current one.

    Raises:
        CoverageError: If exog misses timestamps or moving-average backfill
    """
    base_year = settings.TREND_BASE_YEAR if trend_base_year is None else trend_base_year
    parsed: Tuple[FeatureSpec, ...] = tuple(s if isinstance(s, FeatureSpec) else FeatureSpec.parse(s) for s in specs)
    positions = _locate(grid, exog)
    evaluator = _Evaluator(grid, exog, positions, base_year)
    if parsed:
        rows = np.column_stack([evaluator.evaluate(spec) for spec in parsed])
    else:
        rows = np.empty((len(grid), 0))
    bad = ~np.isfinite(rows)
    if bad.any():
        row, column = (int(i[0]) for i in np.nonzero(bad))
        raise CoverageError(f"feature {parsed[column].id} is non-finite at {grid.label(row)}")
    return DesignMatrix(column_ids=tuple(spec.id for spec in parsed), rows=rows, grid=grid)
