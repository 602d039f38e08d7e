"""
Pydantic schemas for competition rounds, run configuration and run results.
"""
from datetime import date
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union
import json

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.schemas.data import ColumnSchema
from app.schemas.evaluation import ScoreCard, VanillaConfig
from app.schemas.features import GridConfig, TrendMode
from app.schemas.models import SelectionConfig
from app.schemas.scenarios import ShiftConfig

Strategy = Literal["trend", "no_trend", "ensemble", "auto"]
Variant = Literal["trend", "no_trend", "auto"]

STRATEGIES: Tuple[str, ...] = ("trend", "no_trend", "ensemble", "auto")

# Model sets each strategy needs.
STRATEGY_VARIANTS: Dict[str, Tuple[str, ...]] = {
    "trend": ("trend",),
    "no_trend": ("no_trend",),
    "ensemble": ("trend", "no_trend"),
    "auto": ("auto",),
}

VARIANT_TREND_MODE: Dict[str, TrendMode] = {
    "trend": "on",
    "no_trend": "off",
    "auto": "auto",
}


# ============================================================================
# ROUNDS
# ============================================================================

class RoundSpec(BaseModel):
    """One competition round: data cutoff, forecast month and submitted strategy."""

    round_id: int = Field(..., ge=1)
    due_date: Optional[date] = None
    data_cutoff: date
    forecast_start: date
    forecast_end: date
    strategy: Strategy = "trend"

    @model_validator(mode="after")
    def _check_dates(self):
        if self.forecast_start <= self.data_cutoff:
            raise ValueError(f"round {self.round_id}: forecast window must start after the data cutoff")
        if self.forecast_end < self.forecast_start:
            raise ValueError(f"round {self.round_id}: forecast window ends before it starts")
        return self

    @property
    def forecast_window(self) -> Tuple[date, date]:
        return self.forecast_start, self.forecast_end

    @property
    def label(self) -> str:
        return f"R{self.round_id}"


def _round(round_id: int, due: str, cutoff: str, start: str, end: str, strategy: str) -> RoundSpec:
    return RoundSpec(
        round_id=round_id,
        due_date=date.fromisoformat(due),
        data_cutoff=date.fromisoformat(cutoff),
        forecast_start=date.fromisoformat(start),
        forecast_end=date.fromisoformat(end),
        strategy=strategy,
    )


DEFAULT_ROUNDS: Tuple[RoundSpec, ...] = (
    _round(1, "2016-12-15", "2016-11-30", "2017-01-01", "2017-01-31", "trend"),
    _round(2, "2016-12-31", "2016-11-30", "2017-02-01", "2017-02-28", "trend"),
    _round(3, "2017-01-15", "2016-11-30", "2017-02-01", "2017-02-28", "ensemble"),
    _round(4, "2017-01-31", "2016-12-31", "2017-03-01", "2017-03-31", "ensemble"),
    _round(5, "2017-02-14", "2016-12-31", "2017-03-01", "2017-03-31", "ensemble"),
    _round(6, "2017-02-28", "2017-01-31", "2017-04-01", "2017-04-30", "trend"),
)


# ============================================================================
# ZONES AND DST
# ============================================================================

class ZoneSource(BaseModel):
    """A zone read from a CSV file, or the aggregate of other zones."""

    zone_id: str = Field(..., min_length=1)
    path: Optional[Path] = None
    columns: ColumnSchema = Field(default_factory=ColumnSchema)
    aggregate_of: List[str] = Field(default_factory=list)
    actuals: Optional[Path] = Field(default=None, description="Observed load for scoring (default: the zone data)")

    @model_validator(mode="after")
    def _one_source(self):
        if bool(self.path) == bool(self.aggregate_of):
            raise ValueError(f"zone {self.zone_id}: give either a path or aggregate_of")
        return self


class DstConfig(BaseModel):
    passthrough_from_year: int = Field(
        default_factory=lambda: settings.DST_PASSTHROUGH_FROM_YEAR,
        description="Years from which DST days pass through unchanged",
    )
    fallback_convention: Literal["duplicate_rows", "summed_row"] = "duplicate_rows"
    overrides: Dict[int, Tuple[date, date]] = Field(
        default_factory=dict,
        description="Per-year (spring_forward, fall_back) dates replacing the US rule",
    )


# ============================================================================
# RUN CONFIG
# ============================================================================

class RunConfig(BaseModel):
    """Everything a competition run needs, loaded from one JSON file."""

    zones: List[ZoneSource] = Field(..., min_length=1)
    rounds: List[RoundSpec] = Field(default_factory=lambda: list(DEFAULT_ROUNDS))
    strategies: List[Strategy] = Field(
        default_factory=lambda: list(STRATEGIES),
        description="Strategies compared by simulate",
    )
    training_years: int = Field(default=3, ge=1)
    training_start: Optional[date] = Field(
        default=None,
        description="Fixed training start; default 1 Jan of (earliest cutoff year - training_years + 1)",
    )
    grid: GridConfig = Field(default_factory=GridConfig)
    selection: SelectionConfig = Field(default_factory=SelectionConfig)
    shifts: ShiftConfig = Field(default_factory=ShiftConfig)
    vanilla: VanillaConfig = Field(default_factory=VanillaConfig)
    dst: DstConfig = Field(default_factory=DstConfig)
    output_dir: Path = Field(default_factory=lambda: Path(settings.OUTPUT_DIR))

    @field_validator("zones")
    @classmethod
    def _check_zones(cls, zones: List[ZoneSource]) -> List[ZoneSource]:
        ids = [zone.zone_id for zone in zones]
        if len(set(ids)) != len(ids):
            raise ValueError("zone ids must be unique")
        known = set(ids)
        for zone in zones:
            unknown = [child for child in zone.aggregate_of if child not in known or child == zone.zone_id]
            if unknown:
                raise ValueError(f"zone {zone.zone_id} aggregates unknown zones {unknown}")
            nested = [child for child in zone.aggregate_of if not next(z for z in zones if z.zone_id == child).path]
            if nested:
                raise ValueError(f"zone {zone.zone_id} aggregates other aggregates {nested}")
        return zones

    @field_validator("rounds")
    @classmethod
    def _check_rounds(cls, rounds: List[RoundSpec]) -> List[RoundSpec]:
        if not rounds:
            raise ValueError("at least one round is required")
        ids = [spec.round_id for spec in rounds]
        if len(set(ids)) != len(ids):
            raise ValueError("round ids must be unique")
        return rounds

    # ------------------------------------------------------------------
    # loading
    # ------------------------------------------------------------------

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        """
        Load a JSON run config; relative paths resolve against its directory.

        Raises:
            ConfigError: If the file is unreadable, invalid, or names missing files
        """
        path = Path(path)
        try:
            payload = json.loads(path.read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}")
        return cls.from_payload(payload, base_dir=path.parent)

    @classmethod
    def from_payload(cls, payload: dict, base_dir: Optional[Path] = None) -> "RunConfig":
        try:
            config = cls.model_validate(payload)
        except ValidationError as e:
            raise ConfigError(f"invalid run config: {e}")
        if base_dir is not None:
            config = config.resolved(Path(base_dir))
        config.check_paths()
        return config

    def resolved(self, base_dir: Path) -> "RunConfig":
        def resolve(value: Optional[Path]) -> Optional[Path]:
            if value is None or value.is_absolute():
                return value
            return base_dir / value

        zones = [
            zone.model_copy(update={"path": resolve(zone.path), "actuals": resolve(zone.actuals)})
            for zone in self.zones
        ]
        return self.model_copy(update={"zones": zones, "output_dir": resolve(self.output_dir)})

    def check_paths(self):
        for zone in self.zones:
            for value in (zone.path, zone.actuals):
                if value is not None and not Path(value).is_file():
                    raise ConfigError(f"zone {zone.zone_id}: file not found: {value}")

    # ------------------------------------------------------------------
    # lookups
    # ------------------------------------------------------------------

    def zone(self, zone_id: str) -> ZoneSource:
        for zone in self.zones:
            if zone.zone_id == zone_id:
                return zone
        raise ConfigError(f"unknown zone {zone_id!r}")

    def round(self, round_id: int) -> RoundSpec:
        for spec in self.rounds:
            if spec.round_id == round_id:
                return spec
        raise ConfigError(f"unknown round {round_id}")

    def training_window(self, spec: RoundSpec) -> Tuple[date, date]:
        """Shared training start up to the round's data cutoff."""
        if self.training_start is not None:
            start = self.training_start
        else:
            earliest = min(r.data_cutoff for r in self.rounds)
            start = date(earliest.year - self.training_years + 1, 1, 1)
        if start >= spec.data_cutoff:
            raise ConfigError(f"round {spec.round_id}: training start {start} is after the data cutoff")
        return start, spec.data_cutoff


# ============================================================================
# RESULTS
# ============================================================================

class ZoneRunResult(BaseModel):
    """Outcome of one zone in one round."""

    zone_id: str
    round_id: int
    success: bool
    error: Optional[str] = None
    message: Optional[str] = None
    exit_code: int = 0
    outputs: Dict[str, str] = Field(default_factory=dict, description="Artifact name -> path")
    scorecards: List[ScoreCard] = Field(default_factory=list)


class SyntheticConfig(BaseModel):
    """Desk-scale synthetic world."""

    seed: int = 0
    years: int = Field(default=13, description="Calendar years to generate (at least 4)")
    start_year: int = 2005
    zones: List[str] = Field(default_factory=lambda: ["zone_1", "zone_2"], min_length=1)
    trend_per_year: float = Field(default=0.0, description="Load growth in MW per year")
    noise_sd: float = Field(default=15.0, ge=0)
    base_load: float = Field(default=1500.0, gt=0)
    inject_dst: bool = Field(default=True, description="Drop/duplicate rows on DST days before the passthrough year")
