"""
Experiment routers: one module per experiment, dispatched by `run`.

Each handler takes (config, output directory, config echo) and returns a
JSON-ready summary; `run` maps the outcome to the process exit code.
"""
import logging
from pathlib import Path
from typing import Any, Callable, Dict

from ..config import config_echo
from ..errors import RPLabError
from ..io import output_directory, write_json
from ..models.run import Experiment, RunConfig
from .et_sim import run_et_sim
from .rp_sim import run_rp_sim
from .sweep import run_sweep
from .verify import run_verify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERIFY_FAILED = 2

Handler = Callable[[RunConfig, Path, Dict[str, Any]], Dict[str, Any]]

ROUTERS: Dict[Experiment, Handler] = {
    Experiment.ET_SIM: lambda config, out_dir, echo: run_et_sim(config.model, out_dir, echo),
    Experiment.RP_SIM: lambda config, out_dir, echo: run_rp_sim(config.spin, out_dir, echo),
    Experiment.VERIFY: run_verify,
    Experiment.SWEEP: run_sweep,
}


def run_experiment(config: RunConfig, out_dir: Path) -> Dict[str, Any]:
    """Write the config echo and run the configured experiment in out_dir."""
    echo = config_echo(config)
    write_json(echo, out_dir / "config.json")
    return ROUTERS[config.experiment](config, out_dir, echo)


def run(config: RunConfig, output_root: Path) -> int:
    """
    Run one experiment end to end.

    Returns:
        0 on success, 2 if any verification property failed, 1 on any other error.
    """
    try:
        with output_directory(output_root) as out_dir:
            result = run_experiment(config, out_dir)
    except RPLabError as e:
        logger.error(f"{config.experiment.value} failed: {type(e).__name__}: {e}")
        return EXIT_ERROR
    except OSError as e:
        logger.error(f"{config.experiment.value} failed with an I/O error: {e}")
        return EXIT_ERROR
    except Exception as e:
        logger.error(f"Unexpected error running {config.experiment.value}: {e}", exc_info=True)
        return EXIT_ERROR

    if config.experiment is Experiment.VERIFY and not result["passed"]:
        return EXIT_VERIFY_FAILED
    return EXIT_OK
