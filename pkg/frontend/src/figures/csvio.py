"""Schema-checked reading of the simulation CSV dialect.

The dialect is comma-separated with a '.' decimal point, a header row of
column names and a second row of units ("1" marks a dimensionless column).
Every column must declare a unit; tables without data rows are rejected.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np

__all__ = ["SchemaError", "MissingColumnError", "Table", "read_table",
           "column", "array_checksum"]


class SchemaError(ValueError):
    """The CSV file violates the expected header/unit-row schema."""


class MissingColumnError(SchemaError):
    """A required column is absent; ``column`` names it."""

    def __init__(self, column_name: str, path) -> None:
        super().__init__(f"missing column '{column_name}' in {path}")
        self.column = column_name


@dataclass(frozen=True)
class Table:
    path: Path
    names: List[str]
    units: Dict[str, str]
    data: Dict[str, np.ndarray]

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.data.values())))

    def label(self, name: str) -> str:
        """Axis label "name (unit)" built from the declared unit."""
        unit = self.units[name]
        return name if unit == "1" else f"{name} ({unit})"


def read_table(path) -> Table:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise SchemaError(f"{path}: expected a header row and a unit row")
    names = [c.strip() for c in rows[0]]
    units = [c.strip() for c in rows[1]]
    if len(set(names)) != len(names):
        raise SchemaError(f"{path}: duplicate column names")
    if len(units) != len(names):
        raise SchemaError(f"{path}: unit row length does not match header")
    for name, unit in zip(names, units):
        if not name:
            raise SchemaError(f"{path}: empty column name")
        if not unit:
            raise SchemaError(f"{path}: column '{name}' declares no unit")
    body = rows[2:]
    if not body:
        raise SchemaError(f"{path}: no data rows")
    cols: Dict[str, np.ndarray] = {}
    for j, name in enumerate(names):
        try:
            cols[name] = np.array([float(r[j]) for r in body])
        except (ValueError, IndexError) as exc:
            raise SchemaError(
                f"{path}: column '{name}' is not numeric: {exc}") from exc
    return Table(path=path, names=names, units=dict(zip(names, units)),
                 data=cols)


def column(table: Table, name: str) -> np.ndarray:
    if name not in table.data:
        raise MissingColumnError(name, table.path)
    return table.data[name]


def array_checksum(values: np.ndarray) -> str:
    """SHA-256 of the float64 little-endian byte image of ``values``."""
    arr = np.ascontiguousarray(np.asarray(values, dtype="<f8"))
    return hashlib.sha256(arr.tobytes()).hexdigest()
