"""Command-line entry point: trustdyn <command> --config <path> [options]."""
import argparse
import logging
import sys
from typing import List, Optional

from trustdyn.config import COMMANDS, FORMATS, load_config, apply_overrides, build_experiment_config
from trustdyn.runner import EXIT_CONFIG, run_command

logger = logging.getLogger("trustdyn")

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trustdyn",
        description="Evolutionary dynamics of the N-player trust game with punishing investors",
    )
    parser.add_argument("command", choices=COMMANDS, help="experiment to run")
    parser.add_argument("--config", required=True, help="YAML experiment configuration")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a dotted configuration key, e.g. params.lambda=0.05 (repeatable)",
    )
    parser.add_argument("--out", default=None, help="output file (overrides output.path)")
    parser.add_argument("--format", dest="fmt", choices=FORMATS, default=None,
                        help="output format (overrides output.format, csv by default)")
    parser.add_argument("--seed", type=int, default=None, help="Monte-Carlo seed (overrides seed)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads for regime maps and basins (else TRUSTDYN_THREADS, else 1)")
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="logging level (INFO by default)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    # Configure logging
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, stream=sys.stderr)

    try:
        raw = apply_overrides(load_config(args.config), args.overrides)
        config = build_experiment_config(args.command, raw, out=args.out, fmt=args.fmt,
                                         seed=args.seed, threads=args.threads)
    except (FileNotFoundError, ValueError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG

    result = run_command(config)
    if result['success']:
        logger.info(f"✓ {config.command}: {result['rows']} rows written to {result['path']}")
    else:
        logger.error(f"✗ {config.command} failed: {result['error']}")
    return result['exit_code']


if __name__ == "__main__":
    sys.exit(main())
