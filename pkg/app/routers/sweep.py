import copy
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Tuple

import numpy as np

from ..config import config_echo, validate_config
from ..errors import ConfigValidationError
from ..io import output_directory, write_json, write_table
from ..models.run import Experiment, RunConfig
from ..models.table import TimeSeriesTable

logger = logging.getLogger(__name__)

SWEEPABLE_SECTIONS = ("model", "spin")


def expand_sweep(config: RunConfig) -> List[Tuple[float, RunConfig]]:
    """
    One validated config per sweep value, with the swept key replaced.

    Raises:
        ConfigValidationError: the parameter path does not name an existing key,
            or a swept value is invalid for it.
    """
    sweep = config.sweep
    if sweep is None:
        raise ConfigValidationError("sweep", "no sweep section")
    path = sweep.parameter.split(".")
    if path[0] not in SWEEPABLE_SECTIONS or len(path) < 2:
        raise ConfigValidationError("sweep.parameter",
                                    f"'{sweep.parameter}' must start with one of {SWEEPABLE_SECTIONS}")

    base = config_echo(config)
    base["experiment"] = sweep.experiment.value
    base.pop("sweep")
    points = []
    for value in sweep.values:
        data = copy.deepcopy(base)
        node = data
        for key in path[:-1]:
            node = node.get(key) if isinstance(node, dict) else None
            if node is None:
                raise ConfigValidationError("sweep.parameter", f"'{sweep.parameter}' is not a config key")
        if not isinstance(node, dict) or path[-1] not in node:
            raise ConfigValidationError("sweep.parameter", f"'{sweep.parameter}' is not a config key")
        node[path[-1]] = value
        points.append((value, validate_config(data)))
    return points


def _summary_row(experiment: Experiment, result: Dict[str, Any]) -> Dict[str, float]:
    def num(v):
        return float("nan") if v is None else float(v)

    if experiment is Experiment.ET_SIM:
        return {key: num(result.get(key)) for key in ("k_golden", "Gamma_golden", "k_effective", "k_fitted")}
    row = {}
    for label, values in result.items():
        for key in ("Y_S", "survival", "max_entropy"):
            row[f"{key}_{label}"] = num(values[key])
    return row


def run_point(index: int, value: float, config: RunConfig, out_dir: Path) -> Dict[str, float]:
    # deferred: the package module imports this one
    from . import run_experiment

    with output_directory(out_dir) as point_dir:
        result = run_experiment(config, point_dir)
    logger.info(f"Sweep point {index} ({value}) completed successfully")
    return _summary_row(config.experiment, result)


def _run_point_worker(args: Tuple[int, float, str, str]) -> Dict[str, float]:
    index, value, config_json, out_dir = args
    return run_point(index, value, RunConfig.model_validate_json(config_json), Path(out_dir))


def run_sweep(config: RunConfig, out_dir: Path, echo: Dict[str, Any]) -> Dict[str, Any]:
    """Run every sweep point in its own point_NNN directory and write summary.csv."""
    sweep = config.sweep
    points = expand_sweep(config)
    logger.info(f"Starting sweep over {sweep.parameter} with {len(points)} points "
                f"({'parallel' if sweep.parallel else 'sequential'})")
    dirs = [out_dir / f"point_{n:03d}" for n in range(len(points))]

    if sweep.parallel:
        jobs = [(n, value, point.model_dump_json(by_alias=True), str(d))
                for n, ((value, point), d) in enumerate(zip(points, dirs))]
        with ProcessPoolExecutor(max_workers=sweep.max_workers) as pool:
            rows = list(pool.map(_run_point_worker, jobs))
    else:
        rows = [run_point(n, value, point, d) for n, ((value, point), d) in enumerate(zip(points, dirs))]

    columns: Dict[str, Any] = {
        "point": np.arange(len(points), dtype=float),
        "value": np.array([value for value, _ in points], dtype=float),
    }
    for key in rows[0]:
        columns[key] = np.array([row.get(key, float("nan")) for row in rows])
    metadata = {"parameter": sweep.parameter, "experiment": sweep.experiment.value, "config": echo}
    write_table(TimeSeriesTable.from_columns(columns, metadata), out_dir / "summary.csv")
    points_out = [{key: (None if np.isnan(v) else v) for key, v in dict(row, value=value).items()}
                  for (value, _), row in zip(points, rows)]
    summary = {"parameter": sweep.parameter, "points": points_out}
    write_json(summary, out_dir / "summary.json")
    logger.info("sweep completed successfully")
    return summary
