from pydantic import BaseModel, Field, model_validator
from typing import Any, Dict, List, Mapping

import numpy as np


def table_problems(columns: List[str], rows: List[List[float]]) -> List[str]:
    """Invariant violations of a table; empty when it is rectangular with increasing time."""
    problems = []
    if not columns:
        problems.append("table has no columns")
    if any(len(row) != len(columns) for row in rows):
        problems.append("table is not rectangular")
    elif rows and columns:
        times = [row[0] for row in rows]
        if any(b <= a for a, b in zip(times, times[1:])):
            problems.append(f"first column '{columns[0]}' is not strictly increasing")
    return problems


class TimeSeriesTable(BaseModel):
    columns: List[str] = Field(..., description="Column names, the first is time (or a run index)")
    rows: List[List[float]] = Field(default_factory=list)
    metadata: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_invariants(self):
        problems = table_problems(self.columns, self.rows)
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @classmethod
    def from_columns(cls, data: Mapping[str, np.ndarray], metadata: Dict[str, Any] = None) -> "TimeSeriesTable":
        names = list(data)
        matrix = np.column_stack([np.asarray(data[n], dtype=float) for n in names]) if names else np.empty((0, 0))
        return cls(columns=names, rows=matrix.tolist(), metadata=metadata or {})
