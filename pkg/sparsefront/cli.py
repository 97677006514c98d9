"""
Command-line entry point for sparse front experiments.

Usage:
    python -m sparsefront <ingest|run|reference|report> --config experiment.toml [--seed N] [--out DIR]

Examples:
    # Build an instance JSON from price and ESG files
    python -m sparsefront ingest --config experiment.toml

    # Run every pipeline of the experiment for one seed
    python -m sparsefront run --config experiment.toml --seed 3

    # Merge all runs (plus 2 long NSGA-II runs) into reference fronts
    python -m sparsefront reference --config experiment.toml --long-runs 2

    # Metric, profile and plot-data CSVs
    python -m sparsefront report --config experiment.toml --out results/
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from . import __version__, config
from .exceptions import ConfigurationError, SparseFrontError
from .harness import build_references, ingest, load_config, report, run_pipeline

COMMANDS = ("ingest", "run", "reference", "report")


def setup_logging(log_file: Optional[str] = "sparsefront.log", level: int = logging.INFO) -> None:
    """Configure logging to file and console"""
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        handlers.insert(0, logging.FileHandler(log_file))
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsefront",
        description='Sparse multi-objective portfolio fronts: ingestion, runs, references and reports'
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subparsers.add_parser(command)
        sub.add_argument(
            '--config',
            required=True,
            help='Experiment file (TOML or JSON)'
        )
        sub.add_argument(
            '--seed',
            type=int,
            default=None,
            help='Run this seed only (default: the seeds listed in the config)'
        )
        sub.add_argument(
            '--out',
            default=None,
            help='Output directory (default: output_dir from the config)'
        )
        sub.add_argument(
            '--log-file',
            default="sparsefront.log",
            help='Log file path; empty string disables file logging (default: sparsefront.log)'
        )
        sub.add_argument(
            '--verbose',
            action='store_true',
            help='Log per-iteration solver progress'
        )
        if command == "run":
            sub.add_argument(
                '--trace',
                action='store_true',
                help='Write descent traces and SFSD lineage CSVs next to each front'
            )
        if command == "reference":
            sub.add_argument(
                '--long-runs',
                type=int,
                default=None,
                help='Extra long NSGA-II runs merged into the reference (default: nsga2_long_runs)'
            )
    return parser


def _dispatch(args: argparse.Namespace) -> None:
    cfg = load_config(args.config)
    if args.out:
        cfg.output_dir = args.out

    if args.command == "ingest":
        if cfg.ingest is None:
            raise ConfigurationError("the config has no [ingest] section")
        spec = cfg.ingest
        ingest(spec.prices_csv, spec.esg_csv, spec.market_column, spec, output=spec.output)
    elif args.command == "run":
        if getattr(args, "trace", False):
            cfg.trace = True
        seeds = None if args.seed is None else [args.seed]
        records = run_pipeline(cfg, seeds)
        failed = [r for r in records if r.status != "ok"]
        if failed and len(failed) == len(records):
            raise SparseFrontError("every run failed; see the log for details")
    elif args.command == "reference":
        build_references(cfg, args.long_runs)
    else:
        for name, path in report(cfg).items():
            logging.info("%s: %s", name, path)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_file or None, logging.DEBUG if args.verbose else logging.INFO)
    logging.info("=" * 60)
    logging.info(f"sparsefront {__version__}: {args.command}")
    logging.info(f"Config: {args.config}")
    logging.info(f"Threads: {config.NUM_THREADS}")
    logging.info("=" * 60)
    try:
        _dispatch(args)
    except SparseFrontError as exc:
        logging.error(f"{type(exc).__name__}: {exc}")
        return exc.exit_code
    logging.info(f"{args.command} complete")
    return 0


if __name__ == "__main__":
    sys.exit(main())
