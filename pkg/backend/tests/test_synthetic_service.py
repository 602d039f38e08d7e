"""
Seeded synthetic zones.
"""
import json

import numpy as np
import pytest

from app.core.exceptions import ConfigError
from app.schemas.data import HOURS_PER_DAY
from app.schemas.run import RunConfig, SyntheticConfig
from app.services.calendar_service import us_dst_dates
from app.services.orchestrator_service import load_zone_datasets
from app.services.synthetic_service import generate_synthetic, generate_zone


def test_generation_is_deterministic():
    config = SyntheticConfig(seed=9, years=2, start_year=2014)
    first, second = generate_zone(config, 0), generate_zone(config, 0)
    np.testing.assert_array_equal(first.load, second.load)
    np.testing.assert_array_equal(first.temperatures, second.temperatures)

    other_zone = generate_zone(config, 1)
    assert not np.array_equal(first.load, other_zone.load)


def test_trend_adds_a_fixed_step_per_year():
    flat = generate_zone(SyntheticConfig(seed=2, years=3, start_year=2014), 0)
    growing = generate_zone(SyntheticConfig(seed=2, years=3, start_year=2014, trend_per_year=10.0), 0)
    years = flat.grid.dates.astype("datetime64[Y]").astype(np.int64) + 1970
    np.testing.assert_allclose(growing.load - flat.load, 10.0 * (years - 2014), atol=1e-9)


def test_noise_has_no_yearly_drift_per_hour():
    zone = generate_zone(SyntheticConfig(seed=4, years=2, start_year=2014, noise_sd=0.0), 0)
    noisy = generate_zone(SyntheticConfig(seed=4, years=2, start_year=2014), 0)
    noise = noisy.load - zone.load
    years = zone.grid.dates.astype("datetime64[Y]").astype(np.int64)
    for year in np.unique(years):
        for hour in range(1, HOURS_PER_DAY + 1):
            cell = (years == year) & (zone.grid.hours == hour)
            assert abs(noise[cell].mean()) < 1e-9


def test_too_few_years_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        generate_synthetic(SyntheticConfig(years=3), tmp_path)


def test_written_world_round_trips_through_the_loader(tmp_path):
    config = SyntheticConfig(seed=5, years=4, start_year=2012, zones=["north"])
    written = generate_synthetic(config, tmp_path)

    payload = json.loads(written["run_config"].read_text())
    assert payload["zones"] == [{"zone_id": "north", "path": "north.csv"}]

    run_config = RunConfig.from_file(written["run_config"])
    loaded = load_zone_datasets(run_config)["north"]
    original = generate_zone(config, 0)
    assert loaded.grid.same_as(original.grid)

    # Only the re-inserted spring-forward hours differ from the clean series.
    changed = np.flatnonzero(loaded.load != original.load)
    first_day = original.grid.dates[0]
    spring_rows = [
        int((np.datetime64(us_dst_dates(year)[0], "D") - first_day).astype(np.int64)) * HOURS_PER_DAY + 2
        for year in range(2012, 2016)
    ]
    assert set(changed.tolist()) <= set(spring_rows)
    np.testing.assert_array_equal(np.delete(loaded.temperatures, spring_rows, axis=0),
                                  np.delete(original.temperatures, spring_rows, axis=0))
