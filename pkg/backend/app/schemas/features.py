"""
Pydantic schemas for the candidate feature catalog and design matrices.
"""
import re
from functools import lru_cache
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.schemas.data import HourlyGrid, frozen_array

TrendMode = Literal["on", "off", "auto"]
Interaction = Literal["month", "dow"]
FeatureFamily = Literal["intercept", "trend", "holiday", "dow", "month", "fourier", "poly", "ma", "ix"]

DOW_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
MONTH_NAMES = ("jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec")

INTERCEPT_ID = "intercept"
TREND_ID = "trend"
HOLIDAY_ID = "holiday"


# ============================================================================
# GRID CONFIG
# ============================================================================

class GridConfig(BaseModel):
    """Parameter ranges the candidate catalog is generated from."""

    yearly_harmonics: int = Field(default=3, ge=0, description="Yearly Fourier harmonics K_y")
    weekly_harmonics: int = Field(default=3, ge=0, description="Weekly Fourier harmonics K_w")
    ma_windows: List[int] = Field(
        default_factory=lambda: [2, 4, 8, 24, 48, 168],
        description="Trailing moving-average windows in hours",
    )
    poly_degrees: List[int] = Field(default_factory=lambda: [1, 2, 3], description="Temperature polynomial degrees")
    interactions: List[Interaction] = Field(
        default_factory=lambda: ["month", "dow"],
        description="Calendar indicator families interacted with temperature",
    )
    interaction_degrees: List[int] = Field(
        default_factory=lambda: [1],
        description="Temperature polynomial degrees used inside interactions",
    )
    trend_base_year: int = Field(
        default_factory=lambda: settings.TREND_BASE_YEAR,
        description="Calendar year whose trend value is 1",
    )

    @field_validator("ma_windows", "poly_degrees", "interaction_degrees")
    @classmethod
    def _positive_unique(cls, value: List[int]) -> List[int]:
        if any(v < 1 for v in value):
            raise ValueError("windows and degrees must be positive integers")
        if len(set(value)) != len(value):
            raise ValueError("windows and degrees must be distinct")
        return value

    @property
    def longest_window(self) -> int:
        return max(self.ma_windows, default=0)


# ============================================================================
# FEATURE SPECS
# ============================================================================

_FOURIER = re.compile(r"^fourier:(yearly|weekly):(sin|cos):k=(\d+)$")
_POLY = re.compile(r"^poly:temp_(\d+):d=(\d+)$")
_MA = re.compile(r"^ma:temp_(\d+):w=(\d+)$")


class FeatureSpec(BaseModel):
    """
    One candidate transformation, identified by a canonical id such as
    ``dow:mon``, ``fourier:yearly:sin:k=2``, ``ma:temp_1:w=24``,
    ``poly:temp_1:d=3``, ``ix:poly:temp_1:d=1*month:jul``, ``trend``.
    """
    model_config = ConfigDict(frozen=True)

    id: str
    family: FeatureFamily
    level: Optional[int] = Field(None, description="0-based day-of-week or month index")
    period: Optional[Literal["yearly", "weekly"]] = None
    function: Optional[Literal["sin", "cos"]] = None
    harmonic: Optional[int] = None
    channel: Optional[int] = Field(None, description="1-based temperature channel")
    degree: Optional[int] = None
    window: Optional[int] = None
    left: Optional["FeatureSpec"] = None
    right: Optional["FeatureSpec"] = None

    @classmethod
    def parse(cls, feature_id: str) -> "FeatureSpec":
        return _parse(feature_id)

    @property
    def max_window(self) -> int:
        """Longest trailing window this feature reads (0 when none)."""
        if self.family == "ma":
            return int(self.window)
        if self.family == "ix":
            return max(self.left.max_window, self.right.max_window)
        return 0

    @property
    def channels(self) -> Tuple[int, ...]:
        if self.channel is not None:
            return (self.channel,)
        if self.family == "ix":
            return self.left.channels + self.right.channels
        return ()


FeatureSpec.model_rebuild()


@lru_cache(maxsize=4096)
def _parse(feature_id: str) -> FeatureSpec:
    if feature_id in (INTERCEPT_ID, TREND_ID, HOLIDAY_ID):
        return FeatureSpec(id=feature_id, family=feature_id)
    if feature_id.startswith("dow:") and feature_id[4:] in DOW_NAMES:
        return FeatureSpec(id=feature_id, family="dow", level=DOW_NAMES.index(feature_id[4:]))
    if feature_id.startswith("month:") and feature_id[6:] in MONTH_NAMES:
        return FeatureSpec(id=feature_id, family="month", level=MONTH_NAMES.index(feature_id[6:]))
    match = _FOURIER.match(feature_id)
    if match and int(match.group(3)) >= 1:
        return FeatureSpec(
            id=feature_id,
            family="fourier",
            period=match.group(1),
            function=match.group(2),
            harmonic=int(match.group(3)),
        )
    match = _POLY.match(feature_id)
    if match and int(match.group(1)) >= 1 and int(match.group(2)) >= 1:
        return FeatureSpec(id=feature_id, family="poly", channel=int(match.group(1)), degree=int(match.group(2)))
    match = _MA.match(feature_id)
    if match and int(match.group(1)) >= 1 and int(match.group(2)) >= 1:
        return FeatureSpec(id=feature_id, family="ma", channel=int(match.group(1)), window=int(match.group(2)))
    if feature_id.startswith("ix:") and feature_id.count("*") == 1:
        left_id, right_id = feature_id[3:].split("*")
        left, right = _parse(left_id), _parse(right_id)
        return FeatureSpec(id=feature_id, family="ix", left=left, right=right)
    raise ValueError(f"unknown feature id {feature_id!r}")


def interaction_id(left: str, right: str) -> str:
    return f"ix:{left}*{right}"


# ============================================================================
# CATALOG
# ============================================================================

class FeatureCatalog(BaseModel):
    """Ordered, duplicate-free list of candidate features."""
    model_config = ConfigDict(frozen=True)

    specs: Tuple[FeatureSpec, ...]
    grid: GridConfig
    trend_mode: TrendMode
    n_channels: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_ids(self):
        ids = [spec.id for spec in self.specs]
        if len(set(ids)) != len(ids):
            raise ValueError("catalog contains duplicate feature ids")
        if INTERCEPT_ID not in ids:
            raise ValueError("catalog must contain the intercept pseudo-feature")
        return self

    def __len__(self) -> int:
        return len(self.specs)

    @property
    def ids(self) -> List[str]:
        return [spec.id for spec in self.specs]

    @property
    def candidates(self) -> List[FeatureSpec]:
        """Everything selection may add (all specs except the intercept)."""
        return [spec for spec in self.specs if spec.id != INTERCEPT_ID]

    def subset(self, ids) -> List[FeatureSpec]:
        wanted = set(ids)
        return [spec for spec in self.specs if spec.id in wanted]


# ============================================================================
# DESIGN MATRIX
# ============================================================================

class DesignMatrix(BaseModel):
    """Materialized feature columns, one row per timestamp."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    column_ids: Tuple[str, ...]
    rows: np.ndarray = Field(..., description="n_rows x n_columns")
    grid: HourlyGrid = Field(..., description="Row timestamps")

    @field_validator("rows", mode="before")
    @classmethod
    def _coerce_rows(cls, value):
        return frozen_array(value, np.float64)

    @model_validator(mode="after")
    def _check_shape(self):
        if self.rows.ndim != 2 or self.rows.shape != (len(self.grid), len(self.column_ids)):
            raise ValueError("design matrix shape must be (timestamps, column ids)")
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("design matrix contains non-finite entries")
        return self

    @property
    def n_rows(self) -> int:
        return int(self.rows.shape[0])

    def column(self, feature_id: str) -> np.ndarray:
        return self.rows[:, self.column_ids.index(feature_id)]

    def take_rows(self, rows) -> "DesignMatrix":
        return DesignMatrix(column_ids=self.column_ids, rows=self.rows[rows], grid=self.grid.take(rows))

    def select(self, ids) -> "DesignMatrix":
        ids = tuple(ids)
        positions = [self.column_ids.index(i) for i in ids]
        return DesignMatrix(column_ids=ids, rows=self.rows[:, positions], grid=self.grid)
