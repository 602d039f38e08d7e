"""
Pydantic schemas for hourly zone data: timestamp grids, series, zone datasets
and the CSV column mapping used at ingestion.
"""
from datetime import date
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

HOURS_PER_DAY = 24


def frozen_array(value, dtype) -> np.ndarray:
    """Copy ``value`` into a read-only numpy array of ``dtype``."""
    array = np.array(value, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def _to_datetime64(value) -> np.datetime64:
    return np.datetime64(value, "D")


# ============================================================================
# TIMESTAMP GRID
# ============================================================================

class HourlyGrid(BaseModel):
    """
    Civil local timestamps at hourly resolution.

    Hours use the hour-ending convention (1..24): hour 1 covers 00:00-01:00
    and hour 24 covers 23:00-24:00 of the same date.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dates: np.ndarray = Field(..., description="Calendar dates (datetime64[D])")
    hours: np.ndarray = Field(..., description="Hour ending, 1..24")

    @field_validator("dates", mode="before")
    @classmethod
    def _coerce_dates(cls, value):
        return frozen_array(np.asarray(value).astype("datetime64[D]"), "datetime64[D]")

    @field_validator("hours", mode="before")
    @classmethod
    def _coerce_hours(cls, value):
        hours = frozen_array(value, np.int64)
        if hours.size and (hours.min() < 1 or hours.max() > HOURS_PER_DAY):
            raise ValueError("hours must be hour-ending values in 1..24")
        return hours

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.dates.ndim != 1 or self.dates.shape != self.hours.shape:
            raise ValueError("dates and hours must be 1-d arrays of equal length")
        return self

    # ------------------------------------------------------------------
    # constructors
    # ------------------------------------------------------------------

    @classmethod
    def from_hour_index(cls, index: np.ndarray) -> "HourlyGrid":
        """Build a grid from continuous hour indices (see ``hour_index``)."""
        index = np.asarray(index, dtype=np.int64)
        return cls(
            dates=(index // HOURS_PER_DAY).astype("datetime64[D]"),
            hours=index % HOURS_PER_DAY + 1,
        )

    @classmethod
    def for_days(cls, start: date, end: date) -> "HourlyGrid":
        """Complete grid from ``start`` to ``end`` inclusive, 24 hours per day."""
        first = _to_datetime64(start).astype(np.int64)
        last = _to_datetime64(end).astype(np.int64)
        if last < first:
            raise ValueError(f"empty date range {start}..{end}")
        index = np.arange(first * HOURS_PER_DAY, (last + 1) * HOURS_PER_DAY, dtype=np.int64)
        return cls.from_hour_index(index)

    # ------------------------------------------------------------------
    # derived views
    # ------------------------------------------------------------------

    def __len__(self) -> int:
        return int(self.dates.shape[0])

    @property
    def hour_index(self) -> np.ndarray:
        """Continuous hour counter: days since epoch * 24 + hour - 1."""
        return self.dates.astype(np.int64) * HOURS_PER_DAY + (self.hours - 1)

    @property
    def first_date(self) -> date:
        return self.dates[0].astype(date)

    @property
    def last_date(self) -> date:
        return self.dates[-1].astype(date)

    def is_contiguous(self) -> bool:
        if len(self) < 2:
            return True
        return bool(np.all(np.diff(self.hour_index) == 1))

    def same_as(self, other: "HourlyGrid") -> bool:
        return np.array_equal(self.dates, other.dates) and np.array_equal(self.hours, other.hours)

    def take(self, rows) -> "HourlyGrid":
        return HourlyGrid(dates=self.dates[rows], hours=self.hours[rows])

    def labels(self) -> List[str]:
        """Render as ``YYYY-MM-DD HH:00`` with HH the hour ending (01..24)."""
        day_strings = np.datetime_as_string(self.dates, unit="D")
        return [f"{day} {hour:02d}:00" for day, hour in zip(day_strings, self.hours.tolist())]

    def label(self, row: int) -> str:
        return f"{np.datetime_as_string(self.dates[row], unit='D')} {int(self.hours[row]):02d}:00"


# ============================================================================
# SERIES AND DATASETS
# ============================================================================

class HourlySeries(BaseModel):
    """Values on an hourly grid (MW for load, °F for temperature)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: HourlyGrid
    values: np.ndarray

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, value):
        return frozen_array(value, np.float64)

    @model_validator(mode="after")
    def _check_alignment(self):
        if self.values.shape != (len(self.grid),):
            raise ValueError(
                f"series has {self.values.shape[0] if self.values.ndim else 0} values "
                f"for {len(self.grid)} timestamps"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("series contains non-finite values")
        return self

    def __len__(self) -> int:
        return len(self.grid)


class ExogenousInputs(BaseModel):
    """
    Temperature channels and holiday flags on a contiguous hourly grid.

    At training time this is the zone history; at forecast time it is one
    scenario trajectory combined with the real forecast calendar.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: HourlyGrid
    temperatures: np.ndarray = Field(..., description="rows x channels")
    holiday: np.ndarray

    @field_validator("temperatures", mode="before")
    @classmethod
    def _coerce_temperatures(cls, value):
        return frozen_array(value, np.float64)

    @field_validator("holiday", mode="before")
    @classmethod
    def _coerce_holiday(cls, value):
        return frozen_array(value, np.float64)

    @model_validator(mode="after")
    def _check_shapes(self):
        n = len(self.grid)
        if self.temperatures.ndim != 2 or self.temperatures.shape[0] != n:
            raise ValueError("temperatures must be a rows x channels matrix aligned to the grid")
        if self.holiday.shape != (n,):
            raise ValueError("holiday flags must align to the grid")
        return self

    @property
    def n_channels(self) -> int:
        return int(self.temperatures.shape[1])


class ZoneDataset(BaseModel):
    """Hourly load, temperature channels and holiday flags for one zone."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    zone_id: str
    grid: HourlyGrid
    load: np.ndarray
    temperatures: np.ndarray = Field(..., description="rows x channels (°F)")
    holiday: np.ndarray
    dst_normalized: bool = Field(False, description="Set once normalize_dst has run")

    @field_validator("load", "holiday", mode="before")
    @classmethod
    def _coerce_vectors(cls, value):
        return frozen_array(value, np.float64)

    @field_validator("temperatures", mode="before")
    @classmethod
    def _coerce_temperatures(cls, value):
        array = np.asarray(value, dtype=np.float64)
        if array.ndim == 1:
            array = array[:, None]
        return frozen_array(array, np.float64)

    @model_validator(mode="after")
    def _check_invariants(self):
        n = len(self.grid)
        if self.load.shape != (n,) or self.holiday.shape != (n,):
            raise ValueError("load and holiday must align to the timestamp grid")
        if self.temperatures.shape[0] != n or self.temperatures.shape[1] < 1:
            raise ValueError("at least one temperature channel aligned to the grid is required")
        if not np.all((self.holiday == 0.0) | (self.holiday == 1.0)):
            raise ValueError("holiday values must be exactly 0 or 1")
        if not (np.all(np.isfinite(self.load)) and np.all(np.isfinite(self.temperatures))):
            raise ValueError("load and temperatures must be finite")
        return self

    def __len__(self) -> int:
        return len(self.grid)

    @property
    def n_channels(self) -> int:
        return int(self.temperatures.shape[1])

    @property
    def channel_names(self) -> List[str]:
        return [f"temp_{i + 1}" for i in range(self.n_channels)]

    def exog(self) -> ExogenousInputs:
        return ExogenousInputs(grid=self.grid, temperatures=self.temperatures, holiday=self.holiday)

    def take(self, rows) -> "ZoneDataset":
        return self.model_copy(update={
            "grid": self.grid.take(rows),
            "load": frozen_array(self.load[rows], np.float64),
            "temperatures": frozen_array(self.temperatures[rows], np.float64),
            "holiday": frozen_array(self.holiday[rows], np.float64),
        })


# ============================================================================
# INGESTION SCHEMA
# ============================================================================

class ColumnSchema(BaseModel):
    """Maps CSV header names to dataset fields."""

    timestamp: Optional[str] = Field(
        default="timestamp",
        description="Single ISO-8601 local date-time column; leave empty when using date + hour",
    )
    date: Optional[str] = Field(default=None, description="Date column (with `hour`)")
    hour: Optional[str] = Field(default=None, description="Hour column (with `date`)")
    load: str = Field(default="load", description="Load column (MW)")
    temperatures: List[str] = Field(
        default_factory=lambda: ["temp_1", "temp_2"],
        min_length=1,
        description="Temperature columns in channel order",
    )
    holiday: Optional[str] = Field(
        default="holiday",
        description="Holiday flag column (0/1); None derives flags from the holiday calendar",
    )
    hour_convention: Literal["ending", "beginning"] = Field(
        default="ending",
        description="'ending' for 1..24 hours (00:00 = hour 24 of the previous day), 'beginning' for 0..23",
    )

    @model_validator(mode="after")
    def _check_time_columns(self):
        if self.date or self.hour:
            if not (self.date and self.hour):
                raise ValueError("date and hour columns must be mapped together")
        elif not self.timestamp:
            raise ValueError("map either a timestamp column or a date + hour pair")
        return self
