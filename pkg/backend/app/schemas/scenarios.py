"""
Pydantic schemas for shuffled temperature scenarios and quantile forecasts.
"""
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.schemas.data import ExogenousInputs, HourlyGrid, frozen_array

DECILES: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def level_name(level: float) -> str:
    return f"q{round(level * 100):d}"


class ShiftConfig(BaseModel):
    """Which historical years to reuse and by how many days to shift them."""

    history_years: Optional[List[int]] = Field(
        default=None,
        description="Source years; None lets the orchestrator pick every usable year",
    )
    day_shifts: List[int] = Field(default_factory=lambda: list(range(-3, 4)), min_length=1)

    @field_validator("history_years")
    @classmethod
    def _non_empty_years(cls, value):
        if value is not None and not value:
            raise ValueError("history_years must not be empty")
        if value is not None and len(set(value)) != len(value):
            raise ValueError("history_years must be distinct")
        return value

    @field_validator("day_shifts")
    @classmethod
    def _distinct_shifts(cls, value):
        if len(set(value)) != len(value):
            raise ValueError("day_shifts must be distinct")
        return value


class ScenarioProvenance(BaseModel):
    model_config = ConfigDict(frozen=True)

    source_year: int
    shift_days: int


class ScenarioSet(BaseModel):
    """
    K temperature trajectories on one contiguous grid.

    The grid starts ``backfill_hours`` before the forecast window so trailing
    moving averages can be evaluated from scenario values alone.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: HourlyGrid
    backfill_hours: int = Field(..., ge=0)
    trajectories: np.ndarray = Field(..., description="K x rows x channels")
    provenance: List[ScenarioProvenance]

    @field_validator("trajectories", mode="before")
    @classmethod
    def _coerce(cls, value):
        return frozen_array(value, np.float64)

    @model_validator(mode="after")
    def _check_shape(self):
        if self.trajectories.ndim != 3 or self.trajectories.shape[:2] != (len(self.provenance), len(self.grid)):
            raise ValueError("trajectories must be K x rows x channels with one provenance entry each")
        if self.backfill_hours > len(self.grid):
            raise ValueError("backfill exceeds the scenario grid")
        if not np.all(np.isfinite(self.trajectories)):
            raise ValueError("scenario trajectories contain non-finite values")
        return self

    def __len__(self) -> int:
        return len(self.provenance)

    @property
    def forecast_grid(self) -> HourlyGrid:
        return self.grid.take(slice(self.backfill_hours, None))

    def exog(self, k: int, holiday: np.ndarray) -> ExogenousInputs:
        """Trajectory ``k`` paired with holiday flags on the full scenario grid."""
        return ExogenousInputs(grid=self.grid, temperatures=self.trajectories[k], holiday=holiday)


class LoadTrajectories(BaseModel):
    """Point load forecasts, one row per scenario."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: HourlyGrid
    values: np.ndarray = Field(..., description="K x rows (MW)")
    provenance: List[ScenarioProvenance] = Field(default_factory=list)

    @field_validator("values", mode="before")
    @classmethod
    def _coerce(cls, value):
        array = np.asarray(value, dtype=np.float64)
        if array.ndim == 1:
            array = array[None, :]
        return frozen_array(array, np.float64)

    @model_validator(mode="after")
    def _check_shape(self):
        if self.values.ndim != 2 or self.values.shape[1] != len(self.grid) or self.values.shape[0] < 1:
            raise ValueError("trajectories must be a non-empty K x rows matrix aligned to the grid")
        return self

    def __len__(self) -> int:
        return int(self.values.shape[0])


class QuantileForecast(BaseModel):
    """Nine deciles per timestamp, non-decreasing across levels."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: HourlyGrid
    levels: Tuple[float, ...] = DECILES
    values: np.ndarray = Field(..., description="rows x levels (MW)")

    @field_validator("values", mode="before")
    @classmethod
    def _coerce(cls, value):
        return frozen_array(value, np.float64)

    @model_validator(mode="after")
    def _check_monotone(self):
        if self.values.shape != (len(self.grid), len(self.levels)):
            raise ValueError("quantile values must be timestamps x levels")
        if list(self.levels) != sorted(self.levels):
            raise ValueError("levels must be increasing")
        if self.values.size and np.any(np.diff(self.values, axis=1) < 0):
            row = int(np.flatnonzero(np.any(np.diff(self.values, axis=1) < 0, axis=1))[0])
            raise ValueError(f"quantiles decrease across levels at {self.grid.label(row)}")
        return self

    @property
    def column_names(self) -> List[str]:
        return [level_name(level) for level in self.levels]
