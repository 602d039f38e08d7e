"""
Evaluation Service - pinball loss, vanilla benchmark and relative scores.
"""
from datetime import date
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.exceptions import AlignmentError, CoverageError, DomainError, TrainingError
from app.schemas.data import HourlyGrid, HourlySeries, ZoneDataset
from app.schemas.evaluation import CompetitionReport, PinballResult, ScoreCard, VanillaConfig
from app.schemas.models import OlsFit
from app.schemas.scenarios import QuantileForecast, ScenarioSet
from app.services.model_service import fit_ols, training_rows
from app.services.scenario_service import reduce_to_deciles

logger = logging.getLogger(__name__)


# ============================================================================
# PINBALL LOSS
# ============================================================================

def _check_tau(tau: float):
    if not (0.0 < tau < 1.0):
        raise DomainError(f"pinball level must lie in (0, 1), got {tau}")


def pinball(y: float, z: float, tau: float) -> float:
    """(y - z)·tau when y >= z, else (z - y)·(1 - tau)."""
    _check_tau(tau)
    if y >= z:
        return (y - z) * tau
    return (z - y) * (1 - tau)


def pinball_loss(y, z, tau: float) -> np.ndarray:
    """Elementwise pinball loss for arrays of actuals and quantile forecasts."""
    _check_tau(tau)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    return np.where(y >= z, (y - z) * tau, (z - y) * (1 - tau))


def total_pinball(actuals: HourlySeries, forecast: QuantileForecast) -> PinballResult:
    """
    Mean pinball loss over every (timestamp, level) pair.

    Raises:
        AlignmentError: If actuals and forecast timestamps differ
    """
    if not actuals.grid.same_as(forecast.grid):
        raise AlignmentError(
            f"actuals ({len(actuals)} rows) and forecast ({len(forecast.grid)} rows) cover different timestamps"
        )
    if len(actuals) == 0:
        raise DomainError("cannot score an empty forecast")
    losses = np.column_stack([
        pinball_loss(actuals.values, forecast.values[:, i], level) for i, level in enumerate(forecast.levels)
    ])
    return PinballResult(
        total=float(losses.mean()),
        per_level=losses.mean(axis=0).tolist(),
        per_timestamp=losses.mean(axis=1).tolist(),
        n_terms=int(losses.size),
    )


# ============================================================================
# VANILLA BENCHMARK
# ============================================================================

class VanillaBenchmark:
    """
    Fixed-structure regression over all hours.

    Columns: trend, 11 month dummies, 167 weekday-by-hour dummies,
    T..T^degree, each power times the month dummies and times 23 hour
    dummies. Only the coefficients are estimated from data.
    """

    def __init__(self, config: Optional[VanillaConfig] = None, trend_base_year: Optional[int] = None):
        self.config = config or VanillaConfig()
        self.trend_base_year = settings.TREND_BASE_YEAR if trend_base_year is None else trend_base_year
        self.fit_: Optional[OlsFit] = None

    def design(self, grid: HourlyGrid, temperature: np.ndarray) -> np.ndarray:
        calendar = pd.DatetimeIndex(grid.dates)
        month = calendar.month.to_numpy()
        week_hour = calendar.dayofweek.to_numpy() * 24 + grid.hours - 1
        n = len(grid)

        trend = (calendar.year.to_numpy() - self.trend_base_year + 1).astype(np.float64)
        months = (month[:, None] == np.arange(2, 13)).astype(np.float64)
        week_hours = (week_hour[:, None] == np.arange(1, 168)).astype(np.float64)
        hours = (grid.hours[:, None] == np.arange(2, 25)).astype(np.float64)
        powers = np.asarray(temperature, dtype=np.float64)[:, None] ** np.arange(1, self.config.degree + 1)

        by_month = (powers[:, :, None] * months[:, None, :]).reshape(n, -1)
        by_hour = (powers[:, :, None] * hours[:, None, :]).reshape(n, -1)
        return np.column_stack([trend, months, week_hours, powers, by_month, by_hour])

    def _channel(self, temperatures: np.ndarray) -> np.ndarray:
        temperatures = np.asarray(temperatures, dtype=np.float64)
        if temperatures.ndim == 1:
            temperatures = temperatures[:, None]
        if self.config.channel > temperatures.shape[1]:
            raise CoverageError(
                f"benchmark reads temperature channel {self.config.channel}, "
                f"data has {temperatures.shape[1]}"
            )
        return temperatures[:, self.config.channel - 1]

    def fit(self, dataset: ZoneDataset, window: Tuple[date, date]) -> "VanillaBenchmark":
        """
        Raises:
            TrainingError: If the window is shorter than settings.MIN_TRAINING_DAYS
        """
        start, end = window
        span = (end - start).days + 1
        if span < settings.MIN_TRAINING_DAYS:
            raise TrainingError(
                f"benchmark window {start}..{end} covers {span} days, at least {settings.MIN_TRAINING_DAYS} required"
            )
        rows = training_rows(dataset, start, end)
        if len(rows) == 0:
            raise TrainingError(f"zone {dataset.zone_id} has no data in {start}..{end}")
        X = self.design(dataset.grid.take(rows), self._channel(dataset.temperatures[rows]))
        self.fit_ = fit_ols(X, dataset.load[rows])
        logger.debug(f"Zone {dataset.zone_id}: vanilla benchmark dropped {len(self.fit_.dropped)} collinear columns")
        return self

    def predict(self, grid: HourlyGrid, temperatures: np.ndarray) -> HourlySeries:
        if self.fit_ is None:
            raise TrainingError("vanilla benchmark used before fit")
        X = self.design(grid, self._channel(temperatures))
        return HourlySeries(grid=grid, values=self.fit_.intercept + X @ self.fit_.coefficients)

    def quantiles(self, scenarios: ScenarioSet) -> QuantileForecast:
        """Deciles of the benchmark run on every scenario trajectory."""
        forecast_grid = scenarios.forecast_grid
        rows = slice(scenarios.backfill_hours, None)
        values = np.stack([
            self.predict(forecast_grid, trajectory[rows]).values for trajectory in scenarios.trajectories
        ])
        return reduce_to_deciles(values, forecast_grid)


def vanilla_forecast(
    dataset: ZoneDataset,
    window: Tuple[date, date],
    grid: HourlyGrid,
    temperatures: np.ndarray,
    config: Optional[VanillaConfig] = None,
) -> HourlySeries:
    """Fit the benchmark on ``window`` and predict ``grid`` from one temperature trajectory."""
    return VanillaBenchmark(config).fit(dataset, window).predict(grid, temperatures)


# ============================================================================
# SCORES
# ============================================================================

def relative_score(model_loss: float, bench_loss: float) -> float:
    """
    Percent improvement of ``model_loss`` over ``bench_loss``.

    Raises:
        DomainError: If bench_loss <= 0
    """
    if not bench_loss > 0:
        raise DomainError(f"benchmark loss must be positive, got {bench_loss}")
    return 100.0 * (bench_loss - model_loss) / bench_loss


def round_score(zone_scores: Sequence[float]) -> float:
    """Mean relative score across zones."""
    scores = list(zone_scores)
    if not scores:
        raise DomainError("round score needs at least one zone score")
    return sum(scores) / len(scores)


def round_half_up(value: float, decimals: Optional[int] = None) -> float:
    """Round for report output the way printed tables do (0.125 -> 0.13)."""
    decimals = settings.SCORE_DECIMALS if decimals is None else decimals
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def score_zone(
    zone_id: str,
    round_id: int,
    strategy: str,
    actuals: HourlySeries,
    forecast: QuantileForecast,
    benchmark: QuantileForecast,
) -> ScoreCard:
    model_loss = total_pinball(actuals, forecast).total
    bench_loss = total_pinball(actuals, benchmark).total
    return ScoreCard(
        zone_id=zone_id,
        round_id=round_id,
        strategy=strategy,
        model_loss=model_loss,
        bench_loss=bench_loss,
        score=relative_score(model_loss, bench_loss),
    )


# ============================================================================
# REPORTS
# ============================================================================

def write_scorecards(cards: List[ScoreCard], path: Union[str, Path]) -> Path:
    """CSV with zone, round, strategy, model_loss, bench_loss, score."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        [
            {
                "zone": card.zone_id,
                "round": card.round_id,
                "strategy": card.strategy,
                "model_loss": card.model_loss,
                "bench_loss": card.bench_loss,
                "score": round_half_up(card.score),
            }
            for card in cards
        ],
        columns=["zone", "round", "strategy", "model_loss", "bench_loss", "score"],
    )
    frame.to_csv(path, index=False)
    return path


def summary_frame(report: CompetitionReport) -> pd.DataFrame:
    """One row per strategy plus ``submitted``: R1..Rn, Mean and Rank (1 = best mean)."""
    round_columns = [f"R{round_id}" for round_id in report.rounds]
    records = []
    rows = [("submitted", report.submitted)] if report.submitted else []
    rows += list(report.scores.items())
    for name, per_round in rows:
        record = {"strategy": name}
        for round_id, column in zip(report.rounds, round_columns):
            value = per_round.get(round_id)
            record[column] = None if value is None else round_half_up(value)
        present = [v for v in per_round.values() if v is not None]
        record["Mean"] = round_half_up(sum(present) / len(present)) if present else None
        records.append(record)
    frame = pd.DataFrame(records, columns=["strategy", *round_columns, "Mean"])
    frame["Mean"] = pd.to_numeric(frame["Mean"])
    frame["Rank"] = frame["Mean"].rank(method="min", ascending=False).astype("Int64")
    return frame


def write_competition_summary(report: CompetitionReport, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary_frame(report).to_csv(path, index=False)
    if report.gaps:
        logger.warning(f"Competition summary has {len(report.gaps)} gaps: {report.gaps}")
    return path
