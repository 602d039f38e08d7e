"""
Synthetic Service - seeded desk-scale zone data for tests and dry runs.
"""
from datetime import date
from pathlib import Path
from typing import Dict, List, Union
import json
import logging

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.schemas.data import HOURS_PER_DAY, HourlyGrid, ZoneDataset
from app.schemas.run import SyntheticConfig
from app.services.calendar_service import holiday_flags, us_dst_dates
from app.services.dataset_service import write_dataset_csv

logger = logging.getLogger(__name__)

MIN_YEARS = 4

# Load response: U-shaped around this temperature (°F).
COMFORT_TEMPERATURE = 62.0


def _temperatures(grid: HourlyGrid, rng: np.random.Generator) -> np.ndarray:
    """Dry bulb with seasonal, diurnal and AR(1) day-to-day structure, plus a derived dew point."""
    calendar = pd.DatetimeIndex(grid.dates)
    day_of_year = calendar.dayofyear.to_numpy()
    hours = grid.hours

    n_days = len(grid) // HOURS_PER_DAY
    anomaly = np.empty(n_days)
    shocks = rng.normal(0.0, 4.0, size=n_days)
    anomaly[0] = shocks[0]
    for day in range(1, n_days):
        anomaly[day] = 0.7 * anomaly[day - 1] + shocks[day]

    offset = rng.uniform(-3.0, 3.0)
    seasonal = 52.0 + offset - 22.0 * np.cos(2.0 * np.pi * (day_of_year - 20) / 365.25)
    diurnal = 8.0 * np.sin(2.0 * np.pi * (hours - 9) / 24.0)
    dry_bulb = seasonal + diurnal + np.repeat(anomaly, HOURS_PER_DAY) + rng.normal(0.0, 1.0, size=len(grid))
    dew_point = dry_bulb - 9.0 - 3.0 * np.sin(2.0 * np.pi * (hours - 6) / 24.0) + rng.normal(0.0, 1.5, size=len(grid))
    return np.column_stack([dry_bulb, dew_point])


def _load(grid: HourlyGrid, temperatures: np.ndarray, holiday: np.ndarray, config: SyntheticConfig,
          rng: np.random.Generator) -> np.ndarray:
    """
    Per hour, load is linear in features the candidate catalog can express:
    day of week, holiday, a yearly harmonic, a cubic in dry bulb, the 24-hour
    moving average of dry bulb and the dew point. The trend adds
    ``trend_per_year`` MW per year.
    """
    calendar = pd.DatetimeIndex(grid.dates)
    hours = grid.hours
    dow = calendar.dayofweek.to_numpy()
    years = calendar.year.to_numpy()
    base = config.base_load

    shape = 1.0 + 0.25 * np.sin(2.0 * np.pi * (hours - 10) / 24.0)
    sensitivity = 1.0 + 0.3 * np.sin(2.0 * np.pi * (hours - 15) / 24.0)
    dry_bulb = temperatures[:, 0]
    deviation = dry_bulb - COMFORT_TEMPERATURE
    daily_mean = pd.Series(dry_bulb).rolling(24, min_periods=1).mean().to_numpy()
    yearly = np.cos(2.0 * np.pi * (calendar.dayofyear.to_numpy() - 1) / 365.25)

    load = base * shape
    load -= 0.08 * base * (dow >= 5)
    load -= 0.1 * base * holiday
    load += 0.03 * base * yearly
    load += sensitivity * (0.5 * deviation ** 2 + 0.003 * deviation ** 3)
    load += 10.0 * sensitivity * (daily_mean - COMFORT_TEMPERATURE)
    load += 3.0 * temperatures[:, 1]
    load += config.trend_per_year * (years - config.start_year)

    # Noise has zero mean within every (year, hour) cell.
    noise = rng.normal(0.0, config.noise_sd, size=len(grid))
    cell = pd.Series(noise).groupby([years, hours]).transform("mean").to_numpy()
    return load + noise - cell


def _raw_rows(grid: HourlyGrid, passthrough_from_year: int) -> np.ndarray:
    """Row order with the spring-forward hour dropped and the fall-back hour doubled."""
    rows = np.arange(len(grid))
    drop = []
    repeat = []
    first_day = grid.dates[0]
    for year in range(grid.first_date.year, min(grid.last_date.year + 1, passthrough_from_year)):
        spring, fall = us_dst_dates(year)
        spring_day = int((np.datetime64(spring, "D") - first_day).astype(np.int64))
        fall_day = int((np.datetime64(fall, "D") - first_day).astype(np.int64))
        drop.append(spring_day * HOURS_PER_DAY + 2)
        repeat.append(fall_day * HOURS_PER_DAY + 1)
    keep = np.setdiff1d(rows, drop)
    counts = np.where(np.isin(keep, repeat), 2, 1)
    return np.repeat(keep, counts)


def generate_zone(config: SyntheticConfig, zone_index: int) -> ZoneDataset:
    """Clean (already 24-hour-per-day) dataset for one synthetic zone."""
    rng = np.random.default_rng([config.seed, zone_index])
    grid = HourlyGrid.for_days(
        date(config.start_year, 1, 1),
        date(config.start_year + config.years - 1, 12, 31),
    )
    temperatures = _temperatures(grid, rng)
    holiday = holiday_flags(grid)
    return ZoneDataset(
        zone_id=config.zones[zone_index],
        grid=grid,
        load=_load(grid, temperatures, holiday, config, rng),
        temperatures=temperatures,
        holiday=holiday,
        dst_normalized=True,
    )


def generate_synthetic(config: SyntheticConfig, out_dir: Union[str, Path]) -> Dict[str, Path]:
    """
    Write one CSV per zone plus a ready-to-run ``run_config.json``.

    Raises:
        ConfigError: If fewer than four years are requested
    """
    if config.years < MIN_YEARS:
        raise ConfigError(f"synthetic data needs at least {MIN_YEARS} years (3 training + 1 evaluation)")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: Dict[str, Path] = {}
    zones: List[dict] = []
    for index, zone_id in enumerate(config.zones):
        dataset = generate_zone(config, index)
        if config.inject_dst:
            raw = dataset.take(_raw_rows(dataset.grid, settings.DST_PASSTHROUGH_FROM_YEAR))
            dataset = raw.model_copy(update={"dst_normalized": False})
        written[zone_id] = write_dataset_csv(dataset, out_dir / f"{zone_id}.csv")
        zones.append({"zone_id": zone_id, "path": f"{zone_id}.csv"})

    run_config = {"zones": zones, "output_dir": "out"}
    written["run_config"] = out_dir / "run_config.json"
    written["run_config"].write_text(json.dumps(run_config, indent=2))
    logger.info(
        f"Generated {len(config.zones)} synthetic zones, {config.start_year}.."
        f"{config.start_year + config.years - 1}, seed {config.seed}, in {out_dir}"
    )
    return written
