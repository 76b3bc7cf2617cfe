"""Command-line interface.

Subcommands ``preprocess``, ``train``, ``analyze``, ``validate`` and
``report``. Progress goes to standard error and a timestamped log file;
command summaries go to standard output.

Usage:
    python main.py preprocess --config config/run.yaml
    python main.py train --config config/run.yaml --seed 7 --sweeps 200
    python main.py analyze --config config/run.yaml --hc HC3
    python main.py report --config config/run.yaml
    python main.py validate --quick
"""

import argparse
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

from agenda_topics import templates
from agenda_topics.commands import cmd_analyze, cmd_preprocess, cmd_report, cmd_train, cmd_validate
from agenda_topics.configuration import apply_overrides, load_config, run_id
from agenda_topics.errors import AgendaError

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_VALIDATION_FAILED = 5


def setup_logging(level: str = "INFO", log_dir: Path = Path("logs")) -> logging.Logger:
    """Set up a timestamped log file plus progress output on standard error."""
    log_dir.mkdir(parents=True, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    log_filename = log_dir / f"agenda_{timestamp}.log"

    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.FileHandler(log_filename, encoding="utf-8"),
            logging.StreamHandler(sys.stderr),
        ],
        force=True,
    )

    # Set specific loggers
    logging.getLogger("httpx").setLevel(logging.WARNING)
    logging.getLogger("langgraph").setLevel(logging.WARNING)
    return logging.getLogger("agenda")


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser with every subcommand."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Run configuration (YAML); defaults to $AGENDA_TOPICS_CONFIG")
    common.add_argument("--seed", type=int, help="RNG seed")
    common.add_argument("--sweeps", type=int, help="Gibbs sweeps")
    common.add_argument("--alpha", type=float, help="Dirichlet-process concentration")
    common.add_argument("--beta", type=float, help="Topic-word smoothing")
    common.add_argument("--likelihood-mode", choices=["paper-approximate", "exact-collapsed"], help="Document likelihood form")
    common.add_argument("--hc", choices=["HC0", "HC1", "HC2", "HC3"], help="Robust standard error flavor")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--log-level", default="INFO", help="Logging level (default INFO)")
    common.add_argument("--log-dir", type=Path, default=Path("logs"), help="Directory for log files")

    parser = argparse.ArgumentParser(
        prog="agenda-topics",
        description="Seeded Dirichlet-process topic model with cross-corpus agenda analytics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("preprocess", parents=[common], help="Build token documents and the shared vocabulary")
    train = sub.add_parser("train", parents=[common], help="Fit the model by collapsed Gibbs sampling")
    train.add_argument("--resume", type=Path, help="Continue from a saved state file")
    analyze = sub.add_parser("analyze", parents=[common], help="Write the analysis bundle for a fitted state")
    analyze.add_argument("--state", type=Path, help="State file (default: <out>/state.json)")
    validate = sub.add_parser("validate", parents=[common], help="Run the acceptance suite")
    validate.add_argument("--quick", action="store_true", help="Smaller samples, performance check skipped")
    validate.add_argument("--inject-fault", action="store_true", help="Corrupt a count table; the run must fail")
    report = sub.add_parser("report", parents=[common], help="Render an analysis bundle as text tables")
    report.add_argument("--bundle", type=Path, help="Bundle directory (default: <out>/analysis)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    logger = setup_logging(args.log_level, args.log_dir)
    start_time = datetime.now()

    try:
        config = apply_overrides(
            load_config(args.config),
            seed=args.seed,
            sweeps=args.sweeps,
            alpha=args.alpha,
            beta=args.beta,
            likelihood_mode=args.likelihood_mode,
            hc=args.hc,
            out=args.out,
        )
        print(templates.banner.format(command=args.command, run_id=run_id(config)), file=sys.stderr)
        logger.info(f"Starting {args.command} for run {run_id(config)}")

        if args.command == "preprocess":
            result = cmd_preprocess(config)
        elif args.command == "train":
            result = cmd_train(config, resume=args.resume)
        elif args.command == "analyze":
            result = cmd_analyze(config, state_path=args.state)
        elif args.command == "validate":
            result = cmd_validate(config, quick=args.quick, inject_fault=args.inject_fault)
        else:
            result = cmd_report(config, bundle=args.bundle)
    except AgendaError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return EXIT_UNEXPECTED
    except Exception as e:
        logger.error(f"Unexpected error in {args.command}: {e}", exc_info=True)
        print(f"Unexpected error: {e}", file=sys.stderr)
        return EXIT_UNEXPECTED

    print(result.summary)
    duration = (datetime.now() - start_time).total_seconds()
    logger.info(f"{args.command} finished in {duration:.2f} seconds; wrote {len(result.written)} files")
    return EXIT_OK if result.passed else EXIT_VALIDATION_FAILED
