"""
Evaluation commands: score rounds against the vanilla benchmark, replay the competition.
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
from app.services.evaluation_service import summary_frame
from app.services.orchestrator_service import load_actuals, load_zone_datasets, run_round, simulate_competition


def evaluate(args: Namespace) -> int:
    config = load_run_config(args)
    datasets = load_zone_datasets(config, selected_zones(config, args))
    actuals = load_actuals(config, datasets)
    results: List[ZoneRunResult] = []
    for spec in selected_rounds(config, args):
        results += run_round(config, spec, args.strategy, datasets, output_dir(config, args), actuals, score=True)
    print_results(results)
    for result in results:
        for card in result.scorecards:
            print(f"R{card.round_id} {card.zone_id} {card.strategy}: score {card.score:.2f}")
    return results_exit_code(results)


def simulate(args: Namespace) -> int:
    """
    Replay every selected round under every strategy and print the
    competition summary. Rounds that could not be scored show as gaps;
    the exit code is 0 as long as the summary was written.
    """
    config = load_run_config(args)
    datasets = load_zone_datasets(config, selected_zones(config, args))
    report = simulate_competition(
        config,
        strategies=args.strategy,
        rounds=args.rounds,
        datasets=datasets,
        out_dir=output_dir(config, args),
    )
    print(summary_frame(report).to_string(index=False))
    for gap in report.gaps:
        print(f"gap: {gap}")
    return 0


def register(subparsers, parents: List[ArgumentParser]):
    parser = subparsers.add_parser(
        "evaluate",
        parents=parents,
        help="Forecast and score against the vanilla benchmark",
    )
    parser.set_defaults(handler=evaluate)

    parser = subparsers.add_parser(
        "simulate",
        parents=parents,
        help="Replay the competition rounds and write the summary table",
    )
    parser.set_defaults(handler=simulate)
