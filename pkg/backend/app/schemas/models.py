"""
Pydantic schemas for per-hour linear models and their selection settings.
"""
from datetime import date
from typing import Dict, List, Optional, Tuple
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.schemas.data import HOURS_PER_DAY, frozen_array
from app.schemas.features import GridConfig, TrendMode


class SelectionConfig(BaseModel):
    """Forward-selection settings."""

    penalty: Optional[float] = Field(
        default=None,
        gt=0,
        description="Penalty per selected feature; None means ln(n)",
    )
    max_features: int = Field(default=30, ge=1, description="Cap on selected features (intercept excluded)")
    min_improvement: float = Field(default=0.0, ge=0, description="Required criterion decrease per step")

    def penalty_for(self, n: int) -> float:
        if self.penalty is not None:
            return float(self.penalty)
        return math.log(max(n, 2))


class OlsFit(BaseModel):
    """Result of one least-squares solve."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    coefficients: np.ndarray = Field(..., description="One entry per input column, 0 for dropped columns")
    intercept: float
    rss: float
    dropped: Tuple[int, ...] = Field(default=(), description="Column positions removed as collinear")

    @field_validator("coefficients", mode="before")
    @classmethod
    def _coerce(cls, value):
        return frozen_array(value, np.float64)


class FitStats(BaseModel):
    n: int = Field(..., ge=1)
    rss: float = Field(..., ge=0)
    criterion: float
    criterion_path: List[float] = Field(default_factory=list, description="Criterion after each accepted step")
    dropped: List[str] = Field(default_factory=list, description="Selected ids removed as collinear at refit")


class LinearModel(BaseModel):
    """Sparse linear model for one hour of day."""
    model_config = ConfigDict(frozen=True)

    hour: int = Field(..., ge=1, le=HOURS_PER_DAY)
    selected: List[str]
    coefficients: List[float]
    intercept: float
    fit_stats: FitStats

    @model_validator(mode="after")
    def _check_model(self):
        if len(set(self.selected)) != len(self.selected):
            raise ValueError(f"hour {self.hour}: selected ids must be distinct")
        if len(self.coefficients) != len(self.selected):
            raise ValueError(f"hour {self.hour}: one coefficient per selected id is required")
        if not all(math.isfinite(c) for c in self.coefficients) or not math.isfinite(self.intercept):
            raise ValueError(f"hour {self.hour}: coefficients must be finite")
        if self.fit_stats.n < len(self.selected) + 1:
            raise ValueError(f"hour {self.hour}: fewer samples than parameters")
        return self

    def coefficient(self, feature_id: str) -> Optional[float]:
        if feature_id not in self.selected:
            return None
        return self.coefficients[self.selected.index(feature_id)]


class HourlyModelSet(BaseModel):
    """Twenty-four hourly models trained on one window."""
    model_config = ConfigDict(frozen=True)

    models: Dict[int, LinearModel]
    window_start: date
    window_end: date
    trend_mode: TrendMode
    grid: GridConfig = Field(default_factory=GridConfig, description="Grid the catalog was built from")

    @model_validator(mode="after")
    def _check_hours(self):
        if sorted(self.models) != list(range(1, HOURS_PER_DAY + 1)):
            raise ValueError("a model set needs exactly one model per hour 1..24")
        for hour, model in self.models.items():
            if model.hour != hour:
                raise ValueError(f"model keyed by hour {hour} reports hour {model.hour}")
        if self.window_end < self.window_start:
            raise ValueError("training window ends before it starts")
        return self

    @property
    def trained_window(self) -> Tuple[date, date]:
        return self.window_start, self.window_end

    @property
    def selected_ids(self) -> List[str]:
        """Union of selected ids across hours, in first-seen order."""
        seen: Dict[str, None] = {}
        for hour in sorted(self.models):
            for feature_id in self.models[hour].selected:
                seen.setdefault(feature_id, None)
        return list(seen)
