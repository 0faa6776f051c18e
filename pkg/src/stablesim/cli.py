"""Command line entry point: ``stablesim <scenario> --config FILE --seed N --out DIR``."""

from __future__ import annotations

import argparse
import json
import sys

from stablesim.harness import SCENARIOS, ConfigError, ExternalSeriesError, ScenarioError, parse_config, run_scenario
from stablesim.market import ConservationError

EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUN = 4


def _error(code: str, message: str, status: int) -> int:
    # One JSON object on one line so callers can parse failures.
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stablesim", description="Run a named simulation scenario.")
    p.add_argument("scenario", nargs="?", help="scenario name (see --list)")
    p.add_argument("--config", help="key = value configuration file (defaults if omitted)")
    p.add_argument("--seed", type=int, help="master seed (overrides a seed line in the config)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--list", action="store_true", help="list scenarios and exit")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.list:
        width = max(len(name) for name in SCENARIOS)
        for name, (_, desc) in SCENARIOS.items():
            print(f"{name.ljust(width)}  {desc}")
        return 0
    if not args.scenario:
        return _error("usage", "a scenario name is required (try --list)", EXIT_USAGE)
    if args.scenario not in SCENARIOS:
        return _error("unknown-scenario", f"unknown scenario {args.scenario!r}", EXIT_USAGE)
    if not args.out:
        return _error("usage", "--out is required", EXIT_USAGE)
    text = ""
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            return _error("config", f"cannot read {args.config}: {exc.strerror}", EXIT_CONFIG)
    try:
        config = parse_config(text, scenario=args.scenario, seed=args.seed)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    try:
        result = run_scenario(config, args.out)
    except (ConfigError, ExternalSeriesError) as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except (ScenarioError, ConservationError, OSError) as exc:
        return _error("run", str(exc), EXIT_RUN)
    sys.stdout.write(result.summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
