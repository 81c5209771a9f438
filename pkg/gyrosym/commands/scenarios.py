"""list-scenarios: show the scenarios available in the scenario directory."""
import argparse

from gyrosym import config
from gyrosym.commands import report_error
from gyrosym.utils.scenarios import list_scenarios


def handle(args: argparse.Namespace) -> int:
    scenario_dir = args.scenario_dir or config.SCENARIO_DIR
    try:
        scenarios = list_scenarios(scenario_dir)
    except Exception as exc:
        return report_error(exc, str(scenario_dir))
    print(f"Scenarios in {scenario_dir}:")
    width = max((len(name) for name, _ in scenarios), default=0)
    for name, description in scenarios:
        print(f"  {name:<{width}}  {description}")
    return config.EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("list-scenarios", help="list built-in scenarios")
    parser.set_defaults(handler=handle)
