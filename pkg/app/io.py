import csv
import json
import logging
import math
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Union

from .errors import OutputError
from .models.table import TimeSeriesTable, table_problems

logger = logging.getLogger(__name__)

FLOAT_FORMAT = ".17g"
PathLike = Union[str, os.PathLike]


def format_float(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def sidecar_path(path: PathLike) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}.meta.json")


def _finite_or_null(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _finite_or_null(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite_or_null(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(data: Dict[str, Any], path: PathLike) -> Path:
    """Write sorted, indented, strict JSON with a trailing newline; NaN and infinities become null."""
    path = Path(path)
    try:
        text = json.dumps(_finite_or_null(data), indent=2, sort_keys=True, allow_nan=False)
    except (TypeError, ValueError) as e:
        raise OutputError(f"cannot serialize {path.name}: {e}") from e
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text + "\n")
    except OSError as e:
        logger.error(f"Failed to write {path}: {e}")
        raise OutputError(f"cannot write {path}: {e}") from e
    return path


def write_table(table: TimeSeriesTable, path: PathLike) -> Path:
    """
    Write a table as CSV (header row, 17 significant digits, '\\n' line endings)
    and its metadata as a `<name>.meta.json` sidecar.

    Raises:
        OutputError: the table breaks its invariants or the file cannot be written.
    """
    path = Path(path)
    problems = table_problems(table.columns, table.rows)
    if problems:
        raise OutputError(f"refusing to write {path.name}: {'; '.join(problems)}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([format_float(v) for v in row])
    except OSError as e:
        logger.error(f"Failed to write {path}: {e}")
        raise OutputError(f"cannot write {path}: {e}") from e
    write_json(table.metadata, sidecar_path(path))
    logger.info(f"Wrote {len(table.rows)} rows to {path}")
    return path


def read_table(path: PathLike) -> TimeSeriesTable:
    """Read a CSV written by `write_table`, with its sidecar metadata if present."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            columns = next(reader)
            rows = [[float(v) for v in row] for row in reader]
        meta_path = sidecar_path(path)
        metadata = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    except (OSError, StopIteration, ValueError) as e:
        raise OutputError(f"cannot read table {path}: {e}") from e
    return TimeSeriesTable(columns=columns, rows=rows, metadata=metadata)


@contextmanager
def output_directory(path: PathLike) -> Iterator[Path]:
    """Provides an existing output directory; failures surface as OutputError."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        logger.info(f"Writing results to {path}")
    except OSError as e:
        logger.error(f"Cannot create output directory {path}: {e}")
        raise OutputError(f"cannot create {path}: {e}") from e
    try:
        yield path
    except OSError as e:
        logger.error(f"I/O error while writing to {path}: {e}")
        raise OutputError(str(e)) from e
    finally:
        logger.debug(f"Finished with output directory {path}")
