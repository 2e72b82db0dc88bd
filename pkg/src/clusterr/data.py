"""Observation matrices, row centering and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CSVParseError, DataError

MIN_SUBJECTS = 2
MIN_FEATURES = 3


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An ``n x p`` matrix of observations, one subject per row.

    Construction only checks that the matrix is two-dimensional, non-empty
    and finite. The stricter shape needed by the estimation procedure
    (``n >= 2``, ``p >= 3``) is checked by :meth:`require_estimable`.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen(self.values)
        if arr.ndim != 2:
            raise DataError(f"expected a 2-d matrix, got {arr.ndim} dimension(s)")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"empty matrix of shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            i, j = np.argwhere(~np.isfinite(arr))[0]
            raise DataError(f"non-finite entry {arr[i, j]!r} at row {i}, column {j}")
        object.__setattr__(self, "values", arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def require_estimable(self) -> "DataMatrix":
        if self.n < MIN_SUBJECTS:
            raise DataError(f"need at least {MIN_SUBJECTS} subjects, got n={self.n}")
        if self.p < MIN_FEATURES:
            raise DataError(f"need at least {MIN_FEATURES} features, got p={self.p}")
        return self


@dataclass(frozen=True, eq=False)
class CenteredMatrix:
    """Row-centered observations together with the subtracted row means."""

    values: np.ndarray
    row_means: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "row_means", _frozen(self.row_means))
        if self.values.ndim != 2 or self.row_means.shape != (self.values.shape[0],):
            raise DataError("row_means must have one entry per row")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def as_array(x) -> np.ndarray:
    """Return the underlying float array of a matrix type or array-like."""
    if isinstance(x, (DataMatrix, CenteredMatrix)):
        return x.values
    return np.asarray(x, dtype=np.float64)


def center_rows(data) -> CenteredMatrix:
    """Subtract each row's mean from that row.

    This removes a subject-specific additive intercept, so the result is
    unchanged when a constant is added to any row.
    """
    if not isinstance(data, DataMatrix):
        data = DataMatrix(data)
    y = data.values
    means = y.mean(axis=1)
    return CenteredMatrix(y - means[:, None], means)


def load_csv(path, has_header: bool = False) -> DataMatrix:
    """Read a comma-separated numeric matrix, one subject per row.

    Row order is preserved. Blank fields, non-numeric fields and rows whose
    field count differs from the first data row are rejected with the
    offending (1-based) line number.
    """
    path = Path(path)
    rows: list[list[float]] = []
    width = None
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=",")
        for fields in reader:
            line = reader.line_num
            if has_header and line == 1:
                continue
            if not fields:
                raise CSVParseError("blank line", line)
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise CSVParseError(f"expected {width} fields, found {len(fields)}", line)
            row = []
            for col, field in enumerate(fields, start=1):
                text = field.strip()
                if not text:
                    raise CSVParseError(f"blank field in column {col}", line)
                try:
                    value = float(text)
                except ValueError:
                    raise CSVParseError(f"cannot parse {field!r} in column {col} as a number", line) from None
                if not math.isfinite(value):
                    raise CSVParseError(f"non-finite value {field!r} in column {col}", line)
                row.append(value)
            rows.append(row)
    if not rows:
        raise CSVParseError(f"no data rows in {path}")
    return DataMatrix(np.array(rows))


def save_csv(data, path, header: list[str] | None = None) -> None:
    """Write a matrix as CSV with full round-trip precision."""
    y = as_array(data)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in y:
            writer.writerow([repr(float(v)) for v in row])
