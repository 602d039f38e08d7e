"""
Orchestrator Service - round-by-round competition workflow.

For each zone and round: train the model sets the strategies need, shuffle
historical temperatures into scenarios, forecast, reduce to deciles,
ensemble where asked, write artifacts and score against the vanilla
benchmark when actuals cover the forecast window.
"""
from concurrent.futures import ThreadPoolExecutor
from datetime import date
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union
import json
import logging

import numpy as np

from app.core.config import settings
from app.core.exceptions import ConfigError, CoverageError, LoadForecastError
from app.schemas.data import HourlyGrid, HourlySeries, ZoneDataset
from app.schemas.evaluation import CompetitionReport, ScoreCard
from app.schemas.features import GridConfig
from app.schemas.models import HourlyModelSet
from app.schemas.run import (
    STRATEGY_VARIANTS,
    VARIANT_TREND_MODE,
    RoundSpec,
    RunConfig,
    ZoneRunResult,
)
from app.schemas.scenarios import QuantileForecast, ShiftConfig
from app.services.calendar_service import DstCalendar, holiday_flags
from app.services.dataset_service import aggregate_zone, ingest_csv, normalize_dst, slice_dataset
from app.services.evaluation_service import (
    VanillaBenchmark,
    round_score,
    score_zone,
    write_competition_summary,
    write_scorecards,
)
from app.services.feature_service import build_catalog, catalog_ids_json
from app.services.model_service import load_model_set, required_backfill, save_model_set, train_hourly
from app.services.scenario_service import (
    ensemble_average,
    forecast_scenarios,
    generate_scenarios,
    reduce_to_deciles,
    source_hour_index,
    write_provenance,
    write_quantile_csv,
)

logger = logging.getLogger(__name__)

# Per zone and round: which model_<variant>.json and catalog_<variant>.json belong together.
MODEL_MANIFEST = "model.json"


# ============================================================================
# DATA LOADING
# ============================================================================

def _wanted_zones(config: RunConfig, zones: Optional[Sequence[str]]) -> List[str]:
    if not zones:
        return [zone.zone_id for zone in config.zones]
    for zone_id in zones:
        config.zone(zone_id)
    return list(zones)


def load_zone_datasets(config: RunConfig, zones: Optional[Sequence[str]] = None) -> Dict[str, ZoneDataset]:
    """
    Ingest and DST-normalize the configured zones; aggregates are built from
    their (normalized) children.

    Raises:
        ConfigError: If a requested zone is not configured
        DataError: From ingestion or normalization
    """
    wanted = _wanted_zones(config, zones)
    needed = set(wanted)
    for zone_id in wanted:
        needed.update(config.zone(zone_id).aggregate_of)

    calendar = DstCalendar(config.dst.overrides)
    datasets: Dict[str, ZoneDataset] = {}
    for zone in config.zones:
        if zone.path is None or zone.zone_id not in needed:
            continue
        raw = ingest_csv(zone.path, zone.columns, zone.zone_id)
        datasets[zone.zone_id] = normalize_dst(
            raw,
            calendar=calendar,
            passthrough_from_year=config.dst.passthrough_from_year,
            fallback_convention=config.dst.fallback_convention,
        )
    for zone in config.zones:
        if zone.aggregate_of and zone.zone_id in needed:
            datasets[zone.zone_id] = aggregate_zone([datasets[child] for child in zone.aggregate_of], zone.zone_id)
    return {zone_id: datasets[zone_id] for zone_id in wanted}


def load_actuals(config: RunConfig, datasets: Dict[str, ZoneDataset]) -> Dict[str, ZoneDataset]:
    """Observed data per zone: the configured actuals file, else the zone data itself."""
    calendar = DstCalendar(config.dst.overrides)
    actuals: Dict[str, ZoneDataset] = {}
    for zone_id, dataset in datasets.items():
        source = config.zone(zone_id)
        if source.actuals is None:
            actuals[zone_id] = dataset
            continue
        raw = ingest_csv(source.actuals, source.columns, zone_id)
        actuals[zone_id] = normalize_dst(
            raw,
            calendar=calendar,
            passthrough_from_year=config.dst.passthrough_from_year,
            fallback_convention=config.dst.fallback_convention,
        )
    return actuals


# ============================================================================
# SCENARIO YEARS
# ============================================================================

def resolve_history_years(
    history: ZoneDataset,
    window: Tuple[date, date],
    day_shifts: Sequence[int],
    backfill_hours: int,
) -> List[int]:
    """
    Every source year whose shifted forecast window, plus backfill, lies
    inside ``history``.

    Raises:
        CoverageError: If no year qualifies
    """
    forecast_grid = HourlyGrid.for_days(*window)
    first = int(history.grid.hour_index[0])
    last = int(history.grid.hour_index[-1])
    years = []
    for year in range(history.grid.first_date.year, history.grid.last_date.year + 1):
        covered = True
        for shift in day_shifts:
            source = source_hour_index(forecast_grid, window[0].year, year, shift)
            if source[0] - backfill_hours < first or source[-1] > last:
                covered = False
                break
        if covered:
            years.append(year)
    if not years:
        raise CoverageError(
            f"zone {history.zone_id}: no history year covers {window[0]}..{window[1]} "
            f"with shifts {list(day_shifts)} and {backfill_hours}h backfill"
        )
    return years


# ============================================================================
# ROUNDS
# ============================================================================

def _variants(strategies: Iterable[str]) -> List[str]:
    variants: List[str] = []
    for strategy in strategies:
        for variant in STRATEGY_VARIANTS[strategy]:
            if variant not in variants:
                variants.append(variant)
    return variants


def _strategy_forecast(strategy: str, quantiles: Dict[str, QuantileForecast]) -> QuantileForecast:
    if strategy == "ensemble":
        return ensemble_average(quantiles["trend"], quantiles["no_trend"])
    return quantiles[STRATEGY_VARIANTS[strategy][0]]


def _train_variants(
    config: RunConfig,
    history: ZoneDataset,
    window: Tuple[date, date],
    strategies: Sequence[str],
) -> Dict[str, HourlyModelSet]:
    return {
        variant: train_hourly(history, window, config.grid, VARIANT_TREND_MODE[variant], config.selection)
        for variant in _variants(strategies)
    }


def _write_models(
    modelsets: Dict[str, HourlyModelSet],
    history: ZoneDataset,
    grid: GridConfig,
    zone_dir: Path,
) -> Path:
    manifest: Dict[str, Dict[str, str]] = {}
    for variant, modelset in modelsets.items():
        model_path = save_model_set(modelset, zone_dir / f"model_{variant}.json")
        catalog_path = zone_dir / f"catalog_{variant}.json"
        catalog_path.write_text(catalog_ids_json(build_catalog(history, grid, modelset.trend_mode)))
        manifest[variant] = {"model": model_path.name, "catalog": catalog_path.name}
    path = zone_dir / MODEL_MANIFEST
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_zone_models(zone_dir: Union[str, Path]) -> Dict[str, HourlyModelSet]:
    """
    Read back the model sets ``train``, ``forecast`` or ``evaluate`` wrote for one zone and round.

    Raises:
        ConfigError: If the directory holds no model manifest
    """
    zone_dir = Path(zone_dir)
    manifest_path = zone_dir / MODEL_MANIFEST
    if not manifest_path.is_file():
        raise ConfigError(f"no {MODEL_MANIFEST} in {zone_dir}")
    manifest = json.loads(manifest_path.read_text())
    return {variant: load_model_set(zone_dir / files["model"]) for variant, files in manifest.items()}


def _actual_series(actuals: Optional[ZoneDataset], grid: HourlyGrid) -> Optional[HourlySeries]:
    """Observed load on ``grid``, or None when the observations do not cover it."""
    if actuals is None or len(actuals) == 0:
        return None
    positions = grid.hour_index - actuals.grid.hour_index[0]
    if positions.min() < 0 or positions.max() >= len(actuals):
        return None
    if not np.array_equal(actuals.grid.hour_index[positions], grid.hour_index):
        return None
    return HourlySeries(grid=grid, values=actuals.load[positions])


def _run_zone(
    config: RunConfig,
    spec: RoundSpec,
    dataset: ZoneDataset,
    strategies: Sequence[str],
    out_dir: Path,
    actuals: Optional[ZoneDataset],
    score: bool,
) -> ZoneRunResult:
    zone_dir = out_dir / spec.label / dataset.zone_id
    history = slice_dataset(dataset, end=spec.data_cutoff)
    window = config.training_window(spec)
    modelsets = _train_variants(config, history, window, strategies)

    backfill = max(required_backfill(modelset) for modelset in modelsets.values())
    shifts = config.shifts
    if not shifts.history_years:
        years = resolve_history_years(history, spec.forecast_window, shifts.day_shifts, backfill)
        shifts = ShiftConfig(history_years=years, day_shifts=shifts.day_shifts)
    scenarios = generate_scenarios(history, spec.forecast_window, shifts, backfill)
    holiday = holiday_flags(scenarios.forecast_grid)

    quantiles = {
        variant: reduce_to_deciles(forecast_scenarios(modelset, scenarios, holiday))
        for variant, modelset in modelsets.items()
    }
    forecasts = {strategy: _strategy_forecast(strategy, quantiles) for strategy in strategies}

    outputs: Dict[str, str] = {}
    primary = spec.strategy if spec.strategy in forecasts else strategies[0]
    outputs["forecast"] = str(write_quantile_csv(forecasts[primary], zone_dir / "forecast.csv"))
    if len(forecasts) > 1:
        for strategy, forecast in forecasts.items():
            outputs[f"forecast_{strategy}"] = str(write_quantile_csv(forecast, zone_dir / f"forecast_{strategy}.csv"))
    outputs["model"] = str(_write_models(modelsets, history, config.grid, zone_dir))
    outputs["provenance"] = str(write_provenance(scenarios, shifts, zone_dir / "provenance.json"))

    scorecards: List[ScoreCard] = []
    if score:
        observed = _actual_series(actuals, scenarios.forecast_grid)
        if observed is None:
            raise CoverageError(
                f"zone {dataset.zone_id}: no actuals for {spec.forecast_start}..{spec.forecast_end}"
            )
        benchmark = VanillaBenchmark(config.vanilla, config.grid.trend_base_year).fit(history, window)
        bench_quantiles = benchmark.quantiles(scenarios)
        scorecards = [
            score_zone(dataset.zone_id, spec.round_id, strategy, observed, forecast, bench_quantiles)
            for strategy, forecast in forecasts.items()
        ]
        outputs["scorecard"] = str(write_scorecards(scorecards, zone_dir / "scorecard.csv"))
        for card in scorecards:
            logger.info(
                f"{spec.label} zone {dataset.zone_id} {card.strategy}: model {card.model_loss:.3f}, "
                f"benchmark {card.bench_loss:.3f}, score {card.score:.2f}"
            )

    logger.info(f"{spec.label} zone {dataset.zone_id}: wrote {len(outputs)} artifacts to {zone_dir}")
    return ZoneRunResult(
        zone_id=dataset.zone_id,
        round_id=spec.round_id,
        success=True,
        message=f"{len(scenarios)} scenarios, strategies {', '.join(forecasts)}",
        outputs=outputs,
        scorecards=scorecards,
    )


def _failed(zone_id: str, spec: RoundSpec, e: LoadForecastError) -> ZoneRunResult:
    logger.error(f"{spec.label} zone {zone_id} failed: {e.error}: {e.message}")
    return ZoneRunResult(
        zone_id=zone_id,
        round_id=spec.round_id,
        success=False,
        error=e.error,
        message=e.message,
        exit_code=e.exit_code,
    )


def train_round(
    config: RunConfig,
    spec: RoundSpec,
    strategies: Optional[Sequence[str]] = None,
    datasets: Optional[Dict[str, ZoneDataset]] = None,
    out_dir: Optional[Path] = None,
) -> List[ZoneRunResult]:
    """Train the model sets a round needs and write them per zone, without forecasting."""
    strategies = list(strategies or [spec.strategy])
    datasets = datasets if datasets is not None else load_zone_datasets(config)
    out_dir = Path(out_dir or config.output_dir)

    def run(zone_id: str) -> ZoneRunResult:
        try:
            history = slice_dataset(datasets[zone_id], end=spec.data_cutoff)
            modelsets = _train_variants(config, history, config.training_window(spec), strategies)
            path = _write_models(modelsets, history, config.grid, out_dir / spec.label / zone_id)
        except LoadForecastError as e:
            return _failed(zone_id, spec, e)
        return ZoneRunResult(
            zone_id=zone_id,
            round_id=spec.round_id,
            success=True,
            message=f"trained {', '.join(modelsets)}",
            outputs={"model": str(path)},
        )

    with ThreadPoolExecutor(max_workers=settings.MAX_WORKERS) as pool:
        return list(pool.map(run, list(datasets)))


def run_round(
    config: RunConfig,
    spec: RoundSpec,
    strategies: Optional[Sequence[str]] = None,
    datasets: Optional[Dict[str, ZoneDataset]] = None,
    out_dir: Optional[Path] = None,
    actuals: Optional[Dict[str, ZoneDataset]] = None,
    score: bool = False,
) -> List[ZoneRunResult]:
    """
    Run one round for every zone. A failing zone yields an unsuccessful
    ZoneRunResult; the other zones still run.

    Args:
        config: Run configuration
        spec: Round to run
        strategies: Strategies to produce (default: the round's own strategy)
        datasets: Normalized zone data (default: loaded from config)
        out_dir: Artifact root (default: config.output_dir)
        actuals: Observed data used for scoring
        score: Score every strategy against the vanilla benchmark
    """
    strategies = list(strategies or [spec.strategy])
    datasets = datasets if datasets is not None else load_zone_datasets(config)
    out_dir = Path(out_dir or config.output_dir)
    if score and actuals is None:
        actuals = load_actuals(config, datasets)

    def run(zone_id: str) -> ZoneRunResult:
        try:
            return _run_zone(
                config,
                spec,
                datasets[zone_id],
                strategies,
                out_dir,
                (actuals or {}).get(zone_id),
                score,
            )
        except LoadForecastError as e:
            return _failed(zone_id, spec, e)

    logger.info(f"{spec.label}: forecasting {spec.forecast_start}..{spec.forecast_end} for {len(datasets)} zones")
    with ThreadPoolExecutor(max_workers=settings.MAX_WORKERS) as pool:
        return list(pool.map(run, list(datasets)))


def simulate_competition(
    config: RunConfig,
    strategies: Optional[Sequence[str]] = None,
    rounds: Optional[Sequence[int]] = None,
    datasets: Optional[Dict[str, ZoneDataset]] = None,
    out_dir: Optional[Path] = None,
    actuals: Optional[Dict[str, ZoneDataset]] = None,
) -> CompetitionReport:
    """
    Run the selected rounds under every strategy, score each zone against the
    vanilla benchmark and write a Table-1-shaped competition summary.

    A round whose zones cannot all be scored gets no score for that strategy;
    the reason is recorded in ``gaps``.
    """
    strategies = list(strategies or config.strategies)
    specs = [config.round(round_id) for round_id in rounds] if rounds else list(config.rounds)
    datasets = datasets if datasets is not None else load_zone_datasets(config)
    actuals = actuals if actuals is not None else load_actuals(config, datasets)
    out_dir = Path(out_dir or config.output_dir)

    scores: Dict[str, Dict[int, Optional[float]]] = {strategy: {} for strategy in strategies}
    submitted: Dict[int, Optional[float]] = {}
    scorecards: List[ScoreCard] = []
    gaps: List[str] = []

    for spec in specs:
        round_strategies = strategies + ([spec.strategy] if spec.strategy not in strategies else [])
        results = run_round(config, spec, round_strategies, datasets, out_dir, actuals, score=True)
        for result in results:
            if not result.success:
                gaps.append(f"{spec.label} zone {result.zone_id}: {result.error}: {result.message}")
            scorecards.extend(result.scorecards)

        complete = all(result.success for result in results)
        per_strategy = {
            strategy: [card.score for card in scorecards if card.round_id == spec.round_id and card.strategy == strategy]
            for strategy in round_strategies
        }
        for strategy in round_strategies:
            value = round_score(per_strategy[strategy]) if complete and per_strategy[strategy] else None
            if strategy in scores:
                scores[strategy][spec.round_id] = value
            if strategy == spec.strategy:
                submitted[spec.round_id] = value

    report = CompetitionReport(
        rounds=[spec.round_id for spec in specs],
        scores=scores,
        submitted=submitted,
        scorecards=scorecards,
        gaps=gaps,
    )
    write_scorecards(scorecards, out_dir / "scorecards.csv")
    write_competition_summary(report, out_dir / "competition_summary.csv")
    logger.info(f"Competition summary for {len(specs)} rounds and {len(strategies)} strategies written to {out_dir}")
    return report


def first_failure(results: Iterable[ZoneRunResult]) -> Optional[ZoneRunResult]:
    for result in results:
        if not result.success:
            return result
    return None
