"""
Data commands: normalize configured zones, generate a synthetic world.
"""
from argparse import ArgumentParser, Namespace
from typing import List

from pydantic import ValidationError

from app.core.deps import load_run_config, output_dir, selected_zones
from app.core.exceptions import ConfigError
from app.schemas.run import SyntheticConfig
from app.services.dataset_service import write_dataset_csv
from app.services.orchestrator_service import load_zone_datasets
from app.services.synthetic_service import generate_synthetic


# ============================================================================
# INGEST
# ============================================================================

def ingest(args: Namespace) -> int:
    """Ingest and DST-normalize every selected zone into ``<out>/data/<zone>.csv``."""
    config = load_run_config(args)
    datasets = load_zone_datasets(config, selected_zones(config, args))
    target = output_dir(config, args) / "data"
    for zone_id, dataset in datasets.items():
        path = write_dataset_csv(dataset, target / f"{zone_id}.csv")
        print(f"{zone_id}: {len(dataset)} rows, {dataset.grid.first_date}..{dataset.grid.last_date} -> {path}")
    return 0


# ============================================================================
# SYNTH
# ============================================================================

def synth(args: Namespace) -> int:
    defaults = SyntheticConfig()
    try:
        config = SyntheticConfig(
            seed=args.seed,
            years=args.years,
            start_year=args.start_year,
            zones=args.zones or defaults.zones,
            trend_per_year=args.trend_per_year,
            noise_sd=args.noise_sd,
            inject_dst=not args.no_dst,
        )
    except ValidationError as e:
        raise ConfigError(f"invalid synthetic settings: {e}")
    written = generate_synthetic(config, args.out or "synthetic")
    for name, path in written.items():
        print(f"{name}: {path}")
    return 0


def register(subparsers, parents: List[ArgumentParser]):
    parser = subparsers.add_parser(
        "ingest",
        parents=parents,
        help="Normalize the configured zone files to 24 hours per day",
    )
    parser.set_defaults(handler=ingest)

    defaults = SyntheticConfig()
    parser = subparsers.add_parser(
        "synth",
        parents=parents,
        help="Write seeded synthetic zone CSVs and a run config",
    )
    parser.add_argument("--years", type=int, default=defaults.years)
    parser.add_argument("--start-year", type=int, default=defaults.start_year)
    parser.add_argument("--trend-per-year", type=float, default=defaults.trend_per_year, help="MW per year")
    parser.add_argument("--noise-sd", type=float, default=defaults.noise_sd)
    parser.add_argument("--no-dst", action="store_true", help="Write clean 24-hour days only")
    parser.set_defaults(handler=synth)
