"""Observed sample (Y, X, W) and CSV ingestion."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyAfterCleaning,
    MissingColumn,
    NonFiniteInput,
    NonPositiveOutcome,
    ParseError,
)

#: Hard floor on the sample size for estimation commands.
MIN_ESTIMATION_ROWS = 30


@dataclass(frozen=True)
class Dataset:
    """Outcome ``y`` (n,), target covariates ``x`` (n, k) and controls ``w`` (n, m)."""

    y: np.ndarray
    x: np.ndarray
    w: np.ndarray
    y_name: str = "y"
    x_names: tuple[str, ...] = ("x",)
    w_names: tuple[str, ...] = ()

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64).ravel()
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        w = np.asarray(self.w if self.w is not None else np.empty((y.size, 0)), dtype=np.float64)
        if w.ndim == 1:
            w = w[:, None]
        if w.size == 0:
            w = np.empty((y.size, 0))
        if x.shape[0] != y.size or w.shape[0] != y.size:
            raise DimensionMismatch(
                f"row counts differ: y={y.size}, x={x.shape[0]}, w={w.shape[0]}"
            )
        if not 1 <= x.shape[1] <= 2:
            raise DimensionMismatch(f"expected 1 or 2 target columns, got {x.shape[1]}")
        for name, arr in (("y", y), ("x", x), ("w", w)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteInput(f"{name} contains non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)
        x_names = tuple(self.x_names)
        if len(x_names) != x.shape[1]:
            x_names = tuple(f"x{j + 1}" for j in range(x.shape[1]))
        w_names = tuple(self.w_names)
        if len(w_names) != w.shape[1]:
            w_names = tuple(f"w{j + 1}" for j in range(w.shape[1]))
        object.__setattr__(self, "x_names", x_names)
        object.__setattr__(self, "w_names", w_names)

    @property
    def n(self) -> int:
        return self.y.size

    def with_log_outcome(self) -> "Dataset":
        if np.any(self.y <= 0):
            raise NonPositiveOutcome("log-outcome mode requires a strictly positive outcome")
        return Dataset(np.log(self.y), self.x, self.w, f"log({self.y_name})",
                       self.x_names, self.w_names)

    def demote_target(self, j: int) -> "Dataset":
        """Single-target dataset keeping column ``j`` and moving the other to the controls."""
        keep = self.x[:, j]
        other = np.delete(self.x, j, axis=1)
        w = np.column_stack([other, self.w]) if self.w.size else other
        names = tuple(n for i, n in enumerate(self.x_names) if i != j)
        return Dataset(self.y, keep, w, self.y_name, (self.x_names[j],), names + self.w_names)


@dataclass
class LoadReport:
    path: str
    rows_read: int
    rows_dropped: int
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "path": self.path,
            "rows_read": self.rows_read,
            "rows_dropped": self.rows_dropped,
            "ranges": {k: list(v) for k, v in self.ranges.items()},
        }


def ingest_csv(path, y: str, x, w=()) -> tuple[Dataset, LoadReport]:
    """Read the mapped columns of a headed CSV file.

    Rows with an empty, NaN or infinite value in any mapped column are
    dropped and counted. A token that is not a number raises
    :class:`ParseError` with its location.
    """
    x = [x] if isinstance(x, str) else list(x)
    w = [w] if isinstance(w, str) else list(w)
    columns = [y, *x, *w]
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyAfterCleaning(f"{path} has no header row") from None
        index = {}
        for col in columns:
            if col not in header:
                raise MissingColumn(col)
            index[col] = header.index(col)
        rows = []
        read = dropped = 0
        for lineno, record in enumerate(reader, start=2):
            if not record or all(not tok.strip() for tok in record):
                continue
            read += 1
            values = []
            bad = False
            for col in columns:
                j = index[col]
                tok = record[j].strip() if j < len(record) else ""
                if tok == "" or tok.lower() in ("na", "nan"):
                    bad = True
                    continue
                try:
                    v = float(tok)
                except ValueError:
                    raise ParseError(f"cannot parse {tok!r} as a number", lineno, col) from None
                if not math.isfinite(v):
                    bad = True
                values.append(v)
            if bad:
                dropped += 1
                continue
            rows.append(values)
    if not rows:
        raise EmptyAfterCleaning(f"{path}: no complete rows among {read} read")
    arr = np.array(rows, dtype=np.float64)
    k = len(x)
    ds = Dataset(arr[:, 0], arr[:, 1:1 + k], arr[:, 1 + k:], y, tuple(x), tuple(w))
    ranges = {c: (float(arr[:, i].min()), float(arr[:, i].max())) for i, c in enumerate(columns)}
    return ds, LoadReport(str(path), read, dropped, ranges)
