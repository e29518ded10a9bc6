import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

from app.config import parse_config
from app.dependencies import resolve_log_level, resolve_output_dir
from app.errors import ConfigParseError, ConfigValidationError
from app.models.run import Experiment
from app.routers import EXIT_ERROR, run

# Load environment variables first (RPLAB_OUTPUT_DIR, RPLAB_LOG_LEVEL)
load_dotenv()
logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rplab",
        description="Reactant-product coherence lab: ET dynamics, perturbation theory and spin master equations.",
    )
    parser.add_argument("config", help="JSON run configuration")
    parser.add_argument("--output-dir", help="Output root (overrides the config and RPLAB_OUTPUT_DIR)")
    parser.add_argument("--experiment", choices=[e.value for e in Experiment],
                        help="Run this experiment instead of the one in the config")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings and errors")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=resolve_log_level(args.quiet),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Cannot read config {args.config}: {e}")
        return EXIT_ERROR

    try:
        config = parse_config(text, experiment=args.experiment)
    except ConfigParseError as e:
        logger.error(f"Config parse error: {e}")
        return EXIT_ERROR
    except ConfigValidationError as e:
        logger.error(f"Config validation error at {e.key_path}: {e}")
        return EXIT_ERROR

    output_root = resolve_output_dir(config, args.output_dir)
    logger.info(f"Starting {config.experiment.value} experiment")
    return run(config, output_root)


if __name__ == "__main__":
    sys.exit(main())
