"""
Shared fixtures: small synthetic zones and helpers for hand-built datasets.
"""
from datetime import date
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pytest

from app.core.logging import setup_logging
from app.schemas.data import HourlyGrid, ZoneDataset
from app.schemas.features import GridConfig
from app.schemas.run import SyntheticConfig
from app.services.synthetic_service import generate_synthetic, generate_zone

setup_logging("WARNING")


def make_dataset(
    grid: HourlyGrid,
    load: np.ndarray,
    temperatures: Optional[np.ndarray] = None,
    holiday: Optional[np.ndarray] = None,
    zone_id: str = "test",
    dst_normalized: bool = False,
) -> ZoneDataset:
    n = len(grid)
    if temperatures is None:
        temperatures = np.column_stack([50.0 + np.arange(n) % 24, 40.0 + np.arange(n) % 7])
    return ZoneDataset(
        zone_id=zone_id,
        grid=grid,
        load=load,
        temperatures=temperatures,
        holiday=np.zeros(n) if holiday is None else holiday,
        dst_normalized=dst_normalized,
    )


@pytest.fixture
def year_grid() -> HourlyGrid:
    return HourlyGrid.for_days(date(2010, 1, 1), date(2010, 12, 31))


@pytest.fixture
def small_grid_config() -> GridConfig:
    """Catalog that still spans everything the synthetic load is built from."""
    return GridConfig(
        yearly_harmonics=1,
        weekly_harmonics=0,
        ma_windows=[24],
        poly_degrees=[1, 2, 3],
        interactions=[],
    )


@pytest.fixture(scope="session")
def three_year_zone() -> ZoneDataset:
    """Clean zone covering 2013-2015, trend free."""
    return generate_zone(SyntheticConfig(seed=3, years=3, start_year=2013), 0)


@pytest.fixture(scope="session")
def long_history() -> ZoneDataset:
    """Clean zone covering 2005-2017."""
    return generate_zone(SyntheticConfig(seed=1, years=13, start_year=2005), 0)


@pytest.fixture(scope="session")
def synthetic_world(tmp_path_factory) -> Dict[str, Path]:
    """Thirteen years (2005-2017), two zones, DST irregularities injected."""
    return generate_synthetic(SyntheticConfig(seed=11), tmp_path_factory.mktemp("world"))
