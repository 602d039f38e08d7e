"""
Pydantic schemas for pinball scoring, scorecards and competition reports.
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class PinballResult(BaseModel):
    """Mean pinball loss over all (timestamp, level) terms."""

    total: float = Field(..., ge=0)
    per_level: List[float]
    per_timestamp: List[float] = Field(..., description="Mean over levels at each timestamp")
    n_terms: int = Field(..., ge=0)


class VanillaConfig(BaseModel):
    """Fixed-structure benchmark regression settings."""

    channel: int = Field(default=1, ge=1, description="Temperature channel the benchmark reads")
    degree: int = Field(default=3, ge=1, description="Highest temperature power")


class ScoreCard(BaseModel):
    zone_id: str
    round_id: int = Field(..., ge=1)
    strategy: str
    model_loss: float = Field(..., ge=0)
    bench_loss: float = Field(..., ge=0)
    score: float = Field(..., description="Relative improvement over the benchmark, percent")


class CompetitionReport(BaseModel):
    """Round scores per strategy; None marks a round that could not be scored."""

    rounds: List[int]
    scores: Dict[str, Dict[int, Optional[float]]]
    submitted: Dict[int, Optional[float]] = Field(
        default_factory=dict,
        description="Per round, the score of the strategy configured for that round",
    )
    scorecards: List[ScoreCard] = Field(default_factory=list)
    gaps: List[str] = Field(default_factory=list, description="Human-readable reasons for missing scores")

    @model_validator(mode="after")
    def _check_rounds(self):
        for strategy, per_round in self.scores.items():
            if set(per_round) - set(self.rounds):
                raise ValueError(f"strategy {strategy} reports rounds outside {self.rounds}")
        return self

    def mean(self, strategy: str) -> Optional[float]:
        return _mean(self.scores[strategy].values())

    def submitted_mean(self) -> Optional[float]:
        return _mean(self.submitted.values())


def _mean(values) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return sum(present) / len(present)
