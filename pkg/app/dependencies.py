import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from .models.run import RunConfig

logger = logging.getLogger(__name__)

load_dotenv()

DEFAULT_OUTPUT_DIR = "rplab_output"
DEFAULT_LOG_LEVEL = "INFO"


def resolve_output_dir(config: RunConfig, cli_override: Optional[str] = None) -> Path:
    """
    Output root for a run: --output-dir, then the config's output_dir, then
    RPLAB_OUTPUT_DIR, then ./rplab_output.
    """
    for source, value in (
        ("command line", cli_override),
        ("config", config.output_dir),
        ("RPLAB_OUTPUT_DIR", os.getenv("RPLAB_OUTPUT_DIR")),
    ):
        if value:
            logger.info(f"Output directory {value} (from {source})")
            return Path(value)
    logger.info(f"No output directory configured, using ./{DEFAULT_OUTPUT_DIR}")
    return Path(DEFAULT_OUTPUT_DIR)


def resolve_log_level(quiet: bool = False) -> int:
    if quiet:
        return logging.WARNING
    name = os.getenv("RPLAB_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        logger.warning(f"Unknown RPLAB_LOG_LEVEL '{name}', falling back to {DEFAULT_LOG_LEVEL}")
        return logging.INFO
    return level
