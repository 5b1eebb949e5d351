"""Time-series container and its CSV form (RFC 4180, 17 significant digits)."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    """Sampled trajectory of one run.

    ``columns`` maps column name to an array aligned with ``t``.  ``meta``
    carries engine/run information (model kind, grid, truncation flag, ...).
    """

    t: np.ndarray
    columns: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = len(self.t)
        for name, col in self.columns.items():
            if len(col) != n:
                raise ValueError(f"column {name!r} has length {len(col)} != {n}")

    def __len__(self) -> int:
        return len(self.t)

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def displacement(self) -> np.ndarray:
        """Primary displacement trace: 'x' if present, else 'delta_1'."""
        if "x" in self.columns:
            return self.columns["x"]
        if "delta_1" in self.columns:
            return self.columns["delta_1"]
        raise KeyError("series has neither 'x' nor 'delta_1'")

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(["t", *self.columns])
        cols = [self.t, *self.columns.values()]
        for row in zip(*cols):
            writer.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def read_csv(cls, path) -> "TimeSeries":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader if row]
        if not header or header[0] != "t":
            raise ValueError(f"{path}: expected 't' as first CSV column")
        data = np.array(rows, dtype=float).reshape(len(rows), len(header))
        columns = {name: data[:, i + 1] for i, name in enumerate(header[1:])}
        return cls(t=data[:, 0], columns=columns)
