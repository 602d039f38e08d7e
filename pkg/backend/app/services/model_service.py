"""
Model Service - least squares, forward subset selection and hourly model sets.
"""
from concurrent.futures import ThreadPoolExecutor
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
import scipy.linalg

from app.core.config import settings
from app.core.exceptions import CoverageError, DomainError, InsufficientDataError, TrainingError
from app.schemas.data import HOURS_PER_DAY, ExogenousInputs, HourlyGrid, HourlySeries, ZoneDataset
from app.schemas.features import TREND_ID, DesignMatrix, FeatureCatalog, FeatureSpec, GridConfig, TrendMode
from app.schemas.models import FitStats, HourlyModelSet, LinearModel, OlsFit, SelectionConfig
from app.services.feature_service import build_catalog, materialize

logger = logging.getLogger(__name__)

# A column whose component orthogonal to the earlier columns is at most this
# fraction of its own norm counts as collinear.
RANK_TOLERANCE = 1e-9
# rss never drops below this fraction of the total sum of squares inside the criterion.
RSS_FLOOR = 1e-20


def _as_matrix(X: Union[DesignMatrix, np.ndarray]) -> np.ndarray:
    rows = X.rows if isinstance(X, DesignMatrix) else np.asarray(X, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[:, None]
    return rows


# ============================================================================
# LEAST SQUARES
# ============================================================================

def fit_ols(X: Union[DesignMatrix, np.ndarray], y, tol: float = RANK_TOLERANCE) -> OlsFit:
    """
    Least squares with an intercept via an unpivoted QR factorization.

    Columns that are (numerically) linear combinations of earlier columns are
    dropped, first-listed kept, and reported in ``dropped``. The
    factorization is repeated until no weak diagonal remains.

    Args:
        X: n x p design (without intercept column)
        y: Response vector of length n
        tol: Relative rank tolerance

    Returns:
        OlsFit with one coefficient per column of X (0 for dropped columns)

    Raises:
        InsufficientDataError: If n < p + 1
    """
    rows = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    n, p = rows.shape
    if y.shape != (n,):
        raise DomainError(f"response has {y.shape[0] if y.ndim else 0} values for {n} design rows")
    if n < p + 1:
        raise InsufficientDataError(f"{n} samples cannot fit {p} columns plus an intercept")

    design = np.column_stack([np.ones(n), rows])
    kept = list(range(p + 1))
    while True:
        q, r = scipy.linalg.qr(design[:, kept], mode="economic")
        norms = np.linalg.norm(design[:, kept], axis=0)
        weak = np.flatnonzero(np.abs(np.diag(r)) <= tol * norms)
        if weak.size == 0:
            break
        weak_positions = set(weak.tolist())
        kept = [column for position, column in enumerate(kept) if position not in weak_positions]

    beta = scipy.linalg.solve_triangular(r, q.T @ y)
    residual = y - design[:, kept] @ beta
    full = np.zeros(p + 1)
    full[kept] = beta
    dropped = tuple(j - 1 for j in range(1, p + 1) if j not in kept)
    return OlsFit(
        coefficients=full[1:],
        intercept=float(full[0]),
        rss=float(residual @ residual),
        dropped=dropped,
    )


# ============================================================================
# SUBSET SELECTION
# ============================================================================

def information_criterion(n: int, rss: float, k: int, penalty: float, floor: float = 0.0) -> float:
    """n·ln(rss/n) + penalty·k, with rss bounded below by ``floor``."""
    return n * math.log(max(rss, floor, np.finfo(np.float64).tiny) / n) + penalty * k


def select_subset(
    catalog: FeatureCatalog,
    X_full: DesignMatrix,
    y,
    config: SelectionConfig,
    hour: int = 1,
    forced: Optional[Sequence[str]] = None,
    tol: float = RANK_TOLERANCE,
) -> LinearModel:
    """
    Greedy forward selection minimizing n·ln(rss/n) + λ·k.

    Candidates are kept residualized against the intercept and every accepted
    column, so each step scores all candidates with one matrix product. Ties
    go to the earliest candidate in catalog order.

    Args:
        catalog: Candidate features (the intercept is always in the model)
        X_full: Catalog materialized on the training rows
        y: Response on the same rows
        config: Penalty, feature cap and required improvement
        hour: Hour of day the model is for
        forced: Ids added before selection starts; defaults to the trend
            feature when the catalog's trend mode is 'on'

    Raises:
        InsufficientDataError: If there are fewer samples than forced parameters
    """
    y = np.asarray(y, dtype=np.float64)
    n = int(y.shape[0])
    if X_full.n_rows != n:
        raise DomainError(f"design has {X_full.n_rows} rows for {n} responses")

    candidate_ids = [spec.id for spec in catalog.candidates]
    if forced is None:
        forced = [TREND_ID] if catalog.trend_mode == "on" and TREND_ID in candidate_ids else []
    if n < len(forced) + 1:
        raise InsufficientDataError(f"hour {hour}: {n} samples for {len(forced) + 1} forced parameters")

    columns = np.array(X_full.select(candidate_ids).rows, dtype=np.float64)
    penalty = config.penalty_for(n)
    floor = RSS_FLOOR * float(y @ y)

    residual = y - y.mean()
    Z = columns - columns.mean(axis=0)
    thresholds = (tol * np.linalg.norm(columns, axis=0)) ** 2
    active = np.ones(len(candidate_ids), dtype=bool)
    order: List[int] = []

    def accept(j: int):
        nonlocal residual, Z
        z = Z[:, j].copy()
        zz = float(z @ z)
        residual = residual - (z @ residual) / zz * z
        Z = Z - np.outer(z, (z @ Z) / zz)
        active[j] = False
        order.append(j)

    for feature_id in forced:
        j = candidate_ids.index(feature_id)
        if float(Z[:, j] @ Z[:, j]) > thresholds[j]:
            accept(j)
        else:
            active[j] = False
            logger.debug(f"hour {hour}: forced feature {feature_id} is collinear with the intercept")

    rss = float(residual @ residual)
    current = information_criterion(n, rss, len(order), penalty, floor)
    path = [current]

    while active.any() and len(order) < config.max_features and len(order) + 2 <= n:
        zz = np.einsum("ij,ij->j", Z, Z)
        active &= zz > thresholds
        if not active.any():
            break
        gains = np.full(len(candidate_ids), -np.inf)
        gains[active] = (Z[:, active].T @ residual) ** 2 / zz[active]
        j = int(np.argmax(gains))
        proposed = information_criterion(n, max(rss - gains[j], 0.0), len(order) + 1, penalty, floor)
        if not proposed < current - config.min_improvement:
            break
        accept(j)
        rss = float(residual @ residual)
        current = information_criterion(n, rss, len(order), penalty, floor)
        path.append(current)

    selected = [candidate_ids[j] for j in order]
    fit = fit_ols(columns[:, order], y, tol=tol)
    dropped = [selected[j] for j in fit.dropped]
    if dropped:
        logger.warning(f"hour {hour}: dropped collinear features at refit: {dropped}")
    keep = [j for j in range(len(selected)) if j not in fit.dropped]
    selected = [selected[j] for j in keep]
    coefficients = [float(fit.coefficients[j]) for j in keep]

    return LinearModel(
        hour=hour,
        selected=selected,
        coefficients=coefficients,
        intercept=fit.intercept,
        fit_stats=FitStats(
            n=n,
            rss=fit.rss,
            criterion=information_criterion(n, fit.rss, len(selected), penalty, floor),
            criterion_path=path,
            dropped=dropped,
        ),
    )


# ============================================================================
# HOURLY MODEL SETS
# ============================================================================

def training_rows(dataset: ZoneDataset, start: date, end: date, backfill_hours: int = 0) -> np.ndarray:
    """
    Row positions of ``dataset`` inside [start, end] that have at least
    ``backfill_hours`` earlier hours of data.
    """
    dates = dataset.grid.dates
    inside = (dates >= np.datetime64(start, "D")) & (dates <= np.datetime64(end, "D"))
    inside &= np.arange(len(dataset)) >= backfill_hours
    return np.flatnonzero(inside)


def train_hourly(
    dataset: ZoneDataset,
    window: Tuple[date, date],
    grid: GridConfig,
    trend_mode: TrendMode = "on",
    config: Optional[SelectionConfig] = None,
    max_workers: Optional[int] = None,
) -> HourlyModelSet:
    """
    Train one model per hour of day on ``window``.

    The catalog is built and materialized once over the whole window; each
    hour then runs an independent selection on its own rows. Rows too close
    to the start of the dataset to evaluate the longest moving average are
    skipped.

    A constant-load hour gets an intercept-only model under trend_mode
    "off" or "auto". Under "on" the forced trend stays in that model with a
    coefficient near zero.

    Raises:
        TrainingError: If the window is shorter than settings.MIN_TRAINING_DAYS
            or leaves an hour without samples
        CoverageError: If the window is not inside the dataset
    """
    config = config or SelectionConfig()
    start, end = window
    span = (end - start).days + 1
    if span < settings.MIN_TRAINING_DAYS:
        raise TrainingError(
            f"training window {start}..{end} covers {span} days, at least {settings.MIN_TRAINING_DAYS} required"
        )
    if len(dataset) == 0 or start < dataset.grid.first_date or end > dataset.grid.last_date:
        raise CoverageError(f"training window {start}..{end} is not inside zone {dataset.zone_id} data")

    catalog = build_catalog(dataset, grid, trend_mode)
    backfill = max(grid.longest_window - 1, 0)
    rows = training_rows(dataset, start, end, backfill)
    skipped = int(np.count_nonzero(training_rows(dataset, start, end))) - len(rows)
    if skipped:
        logger.info(f"Zone {dataset.zone_id}: skipping {skipped} rows without {backfill} hours of history")

    design = materialize(catalog.specs, dataset.grid.take(rows), dataset.exog(), grid.trend_base_year)
    hours = dataset.grid.hours[rows]
    load = dataset.load[rows]

    def fit_hour(hour: int) -> LinearModel:
        mask = hours == hour
        if not mask.any():
            raise TrainingError(f"zone {dataset.zone_id}: no training samples for hour {hour}")
        return select_subset(catalog, design.take_rows(mask), load[mask], config, hour=hour)

    all_hours = list(range(1, HOURS_PER_DAY + 1))
    with ThreadPoolExecutor(max_workers=max_workers or settings.MAX_WORKERS) as pool:
        models = dict(zip(all_hours, pool.map(fit_hour, all_hours)))

    sizes = [len(models[h].selected) for h in all_hours]
    logger.info(
        f"Zone {dataset.zone_id}: trained 24 hourly models on {start}..{end} "
        f"(trend_mode={trend_mode}, {min(sizes)}-{max(sizes)} features per hour)"
    )
    return HourlyModelSet(
        models=models,
        window_start=start,
        window_end=end,
        trend_mode=trend_mode,
        grid=grid,
    )


def required_backfill(modelset: HourlyModelSet) -> int:
    """Hours of temperature history needed before the first forecast row."""
    windows = [FeatureSpec.parse(feature_id).max_window for feature_id in modelset.selected_ids]
    return max([w - 1 for w in windows if w > 0], default=0)


def predict(modelset: HourlyModelSet, grid: HourlyGrid, exog: ExogenousInputs) -> HourlySeries:
    """
    Point forecast: each timestamp uses the model for its hour.

    Raises:
        CoverageError: If exog misses a timestamp or moving-average backfill
    """
    design = materialize(modelset.selected_ids, grid, exog, modelset.grid.trend_base_year)
    values = np.empty(len(grid))
    for hour in np.unique(grid.hours):
        mask = grid.hours == hour
        model = modelset.models[int(hour)]
        values[mask] = model.intercept
        if model.selected:
            values[mask] += design.select(model.selected).rows[mask] @ np.asarray(model.coefficients)
    return HourlySeries(grid=grid, values=values)


def trend_summary(modelset: HourlyModelSet) -> Dict[int, Optional[float]]:
    """Trend coefficient per hour, None where selection left it out."""
    return {hour: modelset.models[hour].coefficient(TREND_ID) for hour in sorted(modelset.models)}


def save_model_set(modelset: HourlyModelSet, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(modelset.model_dump_json(indent=2))
    logger.info(f"Saved model set to {path}")
    return path


def load_model_set(path: Union[str, Path]) -> HourlyModelSet:
    return HourlyModelSet.model_validate_json(Path(path).read_text())
