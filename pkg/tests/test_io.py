import json

import numpy as np
import pytest
from pydantic import ValidationError

from app.errors import OutputError
from app.io import output_directory, read_table, sidecar_path, write_json, write_table
from app.models.table import TimeSeriesTable


def test_header_only_table(tmp_path):
    table = TimeSeriesTable.from_columns({"t": np.array([]), "P_R": np.array([])})
    path = write_table(table, tmp_path / "empty.csv")
    assert path.read_text() == "t,P_R\n"
    assert read_table(path).rows == []


def test_values_survive_a_round_trip(tmp_path, rng):
    values = rng.normal(size=50) * 10.0 ** rng.integers(-20, 20, size=50)
    table = TimeSeriesTable.from_columns({"t": np.arange(50.0), "x": values}, {"seed": 12345})
    back = read_table(write_table(table, tmp_path / "x.csv"))
    assert back.columns == ["t", "x"]
    assert [row[1] for row in back.rows] == values.tolist()
    assert back.metadata == {"seed": 12345}


def test_line_endings_and_precision(tmp_path):
    table = TimeSeriesTable(columns=["t", "y"], rows=[[0.0, 0.1], [1.0, 1 / 3]])
    text = write_table(table, tmp_path / "y.csv").read_bytes().decode()
    assert "\r" not in text
    assert text.splitlines()[1] == "0,0.10000000000000001"


def test_sidecar_metadata(tmp_path):
    table = TimeSeriesTable(columns=["t"], rows=[[0.0]], metadata={"version": "0.1.0"})
    write_table(table, tmp_path / "populations.csv")
    assert sidecar_path(tmp_path / "populations.csv").name == "populations.meta.json"
    assert json.loads((tmp_path / "populations.meta.json").read_text()) == {"version": "0.1.0"}


def test_non_monotonic_time_rejected():
    with pytest.raises(ValidationError):
        TimeSeriesTable(columns=["t", "y"], rows=[[0.0, 1.0], [0.0, 2.0]])


def test_ragged_rows_rejected_on_write(tmp_path):
    table = TimeSeriesTable.model_construct(columns=["t", "y"], rows=[[0.0, 1.0], [1.0]], metadata={})
    with pytest.raises(OutputError):
        write_table(table, tmp_path / "ragged.csv")
    assert not (tmp_path / "ragged.csv").exists()


def test_json_is_sorted_with_trailing_newline(tmp_path):
    path = write_json({"b": 1, "a": [1.5, None]}, tmp_path / "out.json")
    text = path.read_text()
    assert text.endswith("}\n")
    assert text.index('"a"') < text.index('"b"')


def test_non_finite_floats_written_as_null(tmp_path):
    path = write_json({"a": float("nan"), "b": [1.0, float("inf")], "c": {"d": -np.inf}}, tmp_path / "out.json")
    text = path.read_text()
    assert "NaN" not in text and "Infinity" not in text
    assert json.loads(text) == {"a": None, "b": [1.0, None], "c": {"d": None}}


def test_unwritable_path(tmp_path):
    with pytest.raises(OutputError):
        write_json({}, tmp_path / "missing" / "out.json")


def test_output_directory_created(tmp_path):
    with output_directory(tmp_path / "a" / "b") as out:
        assert out.is_dir()


def test_output_directory_blocked_by_file(tmp_path):
    (tmp_path / "taken").write_text("")
    with pytest.raises(OutputError):
        with output_directory(tmp_path / "taken" / "sub"):
            pass


def test_read_missing_table(tmp_path):
    with pytest.raises(OutputError):
        read_table(tmp_path / "nope.csv")
