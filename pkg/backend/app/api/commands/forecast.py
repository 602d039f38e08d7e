"""
Forecast commands: train hourly model sets, produce decile forecasts.
"""
from argparse import ArgumentParser, Namespace
from typing import List

from app.core.deps import (
    load_run_config,
    output_dir,
    print_results,
    results_exit_code,
    selected_rounds,
    selected_zones,
)
from app.schemas.run import ZoneRunResult
from app.services.orchestrator_service import load_zone_datasets, run_round, train_round


def train(args: Namespace) -> int:
    config = load_run_config(args)
    datasets = load_zone_datasets(config, selected_zones(config, args))
    results: List[ZoneRunResult] = []
    for spec in selected_rounds(config, args):
        results += train_round(config, spec, args.strategy, datasets, output_dir(config, args))
    print_results(results)
    return results_exit_code(results)


def forecast(args: Namespace) -> int:
    """Decile forecasts for the selected rounds; a failed zone does not stop the others."""
    config = load_run_config(args)
    datasets = load_zone_datasets(config, selected_zones(config, args))
    results: List[ZoneRunResult] = []
    for spec in selected_rounds(config, args):
        results += run_round(config, spec, args.strategy, datasets, output_dir(config, args))
    print_results(results)
    return results_exit_code(results)


def register(subparsers, parents: List[ArgumentParser]):
    parser = subparsers.add_parser("train", parents=parents, help="Train hourly model sets and write model.json")
    parser.set_defaults(handler=train)

    parser = subparsers.add_parser("forecast", parents=parents, help="Write decile forecasts per round and zone")
    parser.set_defaults(handler=forecast)
