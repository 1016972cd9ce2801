"""Dataset and target containers, delimited-text ingestion and column statistics.

Columns are stored column-major (Fortran order) because every independence
test reads whole columns. Categorical columns hold level indices
``0 .. level_count - 1`` as floats.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

MAX_INFERRED_LEVELS = 10
_MISSING_TOKENS = {"", "na", "nan", "null"}


class DataError(ValueError):
    """Raised when input data cannot be ingested or violates an invariant."""


@dataclass(frozen=True)
class ColumnKind:
    """Continuous when ``level_count`` is None, otherwise categorical."""

    level_count: int | None = None

    def __post_init__(self):
        if self.level_count is not None and self.level_count < 2:
            raise DataError(f"categorical columns need at least 2 levels, got {self.level_count}")

    @property
    def is_categorical(self) -> bool:
        return self.level_count is not None

    def __str__(self) -> str:
        return "continuous" if self.level_count is None else f"categorical({self.level_count})"


CONTINUOUS = ColumnKind()


def categorical(level_count: int) -> ColumnKind:
    return ColumnKind(int(level_count))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class Dataset:
    """Immutable n_rows x n_cols numeric matrix with named, typed columns.

    Parameters
    ----------
    values : array_like of shape (n_rows, n_cols)
        Cell values. Categorical cells must be integer level indices.
    names : sequence of str, optional
        Unique, non-empty column names. Defaults to ``X1 .. Xp``.
    kinds : sequence of ColumnKind, optional
        Per-column kind. Defaults to all continuous.
    """

    def __init__(self, values, names: Sequence[str] | None = None,
                 kinds: Sequence[ColumnKind] | None = None):
        arr = np.array(values, dtype=float, order="F", copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1, order="F")
        if arr.ndim != 2:
            raise DataError("dataset values must be a 2-d array")
        n_rows, n_cols = arr.shape
        if n_rows < 1:
            raise DataError("dataset needs at least one row")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise DataError(f"missing or non-finite value at row {bad[0]}, column {bad[1]}")
        if names is None:
            names = [f"X{j + 1}" for j in range(n_cols)]
        names = tuple(str(s) for s in names)
        if len(names) != n_cols:
            raise DataError(f"{len(names)} names for {n_cols} columns")
        if any(not s for s in names):
            raise DataError("column names must be non-empty")
        if len(set(names)) != n_cols:
            dup = sorted({s for s in names if names.count(s) > 1})
            raise DataError(f"duplicate column names: {dup}")
        kinds = tuple(kinds) if kinds is not None else (CONTINUOUS,) * n_cols
        if len(kinds) != n_cols:
            raise DataError(f"{len(kinds)} kinds for {n_cols} columns")
        for j, kind in enumerate(kinds):
            if kind.is_categorical:
                col = arr[:, j]
                if np.any(col != np.round(col)) or col.min() < 0 or col.max() >= kind.level_count:
                    raise DataError(
                        f"column {names[j]!r}: categorical cells must be integers in [0, {kind.level_count})")
        self._values = _frozen(arr)
        self._names = names
        self._kinds = kinds
        self._digest: str | None = None

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    @property
    def kinds(self) -> tuple[ColumnKind, ...]:
        return self._kinds

    @property
    def n_rows(self) -> int:
        return self._values.shape[0]

    @property
    def n_cols(self) -> int:
        return self._values.shape[1]

    def __len__(self) -> int:
        return self.n_rows

    def __repr__(self) -> str:
        n_cat = sum(k.is_categorical for k in self._kinds)
        return f"Dataset(n_rows={self.n_rows}, n_cols={self.n_cols}, categorical={n_cat})"

    def column(self, j: int) -> np.ndarray:
        return self._values[:, j]

    def columns(self, idx: Iterable[int]) -> np.ndarray:
        return self._values[:, list(idx)]

    def index_of(self, name_or_index: str | int) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            j = int(name_or_index)
            if not 0 <= j < self.n_cols:
                raise DataError(f"column index {j} out of range")
            return j
        try:
            return self._names.index(name_or_index)
        except ValueError:
            raise DataError(f"no column named {name_or_index!r}") from None

    @property
    def all_continuous(self) -> bool:
        return not any(k.is_categorical for k in self._kinds)

    @property
    def all_categorical(self) -> bool:
        return all(k.is_categorical for k in self._kinds)

    def take(self, rows) -> "Dataset":
        """Row subset, e.g. a training fold."""
        return Dataset(self._values[np.asarray(rows)], self._names, self._kinds)

    def zero_variance_columns(self) -> list[int]:
        """Continuous columns with a single distinct value."""
        v = self._values
        return [j for j, k in enumerate(self._kinds)
                if not k.is_categorical and np.all(v[:, j] == v[0, j])]

    def digest(self) -> str:
        if self._digest is None:
            h = hashlib.sha256()
            h.update(np.ascontiguousarray(self._values).tobytes())
            h.update(json.dumps([self._names, [str(k) for k in self._kinds]]).encode())
            self._digest = h.hexdigest()
        return self._digest


@dataclass(frozen=True, eq=False)
class Target:
    """Outcome vector tagged as ``continuous``, ``binary`` or ``categorical``."""

    kind: str
    values: np.ndarray
    level_count: int | None = None
    name: str = "target"

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise DataError("target must be a non-empty 1-d vector")
        if not np.all(np.isfinite(vals)):
            raise DataError(f"missing target value at row {int(np.argmin(np.isfinite(vals)))}")
        if self.kind == "binary":
            if not np.all((vals == 0) | (vals == 1)):
                raise DataError("binary target must contain only 0/1")
            object.__setattr__(self, "level_count", 2)
        elif self.kind == "categorical":
            if self.level_count is None or self.level_count < 2:
                raise DataError("categorical target needs level_count >= 2")
            if np.any(vals != np.round(vals)) or vals.min() < 0 or vals.max() >= self.level_count:
                raise DataError("categorical target cells must be level indices")
        elif self.kind == "continuous":
            object.__setattr__(self, "level_count", None)
        else:
            raise DataError(f"unknown target kind {self.kind!r}")
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def continuous(cls, values, name: str = "target") -> "Target":
        return cls("continuous", values, None, name)

    @classmethod
    def binary(cls, labels, name: str = "target") -> "Target":
        return cls("binary", labels, 2, name)

    @classmethod
    def categorical(cls, labels, level_count: int, name: str = "target") -> "Target":
        return cls("categorical", labels, level_count, name)

    @property
    def is_discrete(self) -> bool:
        return self.kind != "continuous"

    def __len__(self) -> int:
        return self.values.size

    def take(self, rows) -> "Target":
        return Target(self.kind, self.values[np.asarray(rows)], self.level_count, self.name)

    def check_both_classes(self) -> None:
        if self.kind == "binary" and np.unique(self.values).size < 2:
            raise DataError("binary target contains a single class")

    def digest(self) -> str:
        h = hashlib.sha256(self.values.tobytes())
        h.update(f"{self.kind}:{self.level_count}".encode())
        return h.hexdigest()


def check_paired(ds: Dataset, target: Target) -> None:
    if len(target) != ds.n_rows:
        raise DataError(f"target has {len(target)} rows, dataset has {ds.n_rows}")


# --------------------------------------------------------------------------
# ingestion


def _infer_kind(col: np.ndarray) -> tuple[ColumnKind, np.ndarray]:
    """Integer columns with 2..10 distinct values become categorical level indices."""
    if np.all(col == np.round(col)):
        levels, codes = np.unique(col, return_inverse=True)
        if 2 <= levels.size <= MAX_INFERRED_LEVELS:
            return categorical(levels.size), codes.astype(float)
    return CONTINUOUS, col


def _target_from_column(col: np.ndarray, name: str, kind: str | None) -> Target:
    if kind == "continuous":
        return Target.continuous(col, name)
    col_kind, codes = _infer_kind(col)
    if kind == "categorical" and not col_kind.is_categorical:
        raise DataError(f"target {name!r} declared categorical but is not integer-valued with <= "
                        f"{MAX_INFERRED_LEVELS} levels")
    if not col_kind.is_categorical:
        return Target.continuous(col, name)
    if col_kind.level_count == 2:
        return Target.binary(codes, name)
    return Target.categorical(codes, col_kind.level_count, name)


def load_schema(source: str | IO[str]) -> dict[str, str]:
    """Read a JSON sidecar mapping column name to ``continuous`` or ``categorical``."""
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            schema = json.load(fh)
    else:
        schema = json.load(source)
    if not isinstance(schema, dict):
        raise DataError("schema must be a JSON object mapping column name to kind")
    for name, kind in schema.items():
        if kind not in ("continuous", "categorical"):
            raise DataError(f"schema: column {name!r} has unknown kind {kind!r}")
    return dict(schema)


def load_dataset(source: str | IO[str], target_column: str | int,
                 schema: Mapping[str, str] | None = None) -> tuple[Dataset, Target]:
    """Parse a comma- or tab-delimited table with a header row.

    The delimiter is detected from the header line. Empty and ``NA`` cells are
    rejected, since none of the tests handle missing data.

    Returns the predictors (target column removed) and the target.
    """
    if isinstance(source, str):
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    else:
        text = source.read()
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise DataError("empty input: a header row is required")
    delimiter = "\t" if "\t" in lines[0] else ","
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    header = [h.strip() for h in next(reader)]
    if len(set(header)) != len(header):
        dup = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"duplicate header names: {dup}")
    rows: list[list[float]] = []
    for r, row in enumerate(reader):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise DataError(f"row {r + 1}: expected {len(header)} fields, got {len(row)}")
        parsed = []
        for c, cell in enumerate(row):
            cell = cell.strip()
            if cell.lower() in _MISSING_TOKENS:
                raise DataError(f"missing value at row {r + 1}, column {header[c]!r}")
            try:
                parsed.append(float(cell))
            except ValueError:
                raise DataError(f"non-numeric value {cell!r} at row {r + 1}, column {header[c]!r}") from None
        rows.append(parsed)
    if not rows:
        raise DataError("no data rows")
    matrix = np.array(rows, dtype=float)

    if isinstance(target_column, (int, np.integer)):
        if not 0 <= int(target_column) < len(header):
            raise DataError(f"target column index {target_column} out of range")
        t_idx = int(target_column)
    else:
        if target_column not in header:
            raise DataError(f"target column {target_column!r} not in header")
        t_idx = header.index(target_column)

    schema = dict(schema or {})
    unknown = set(schema) - set(header)
    if unknown:
        raise DataError(f"schema names unknown columns: {sorted(unknown)}")

    target = _target_from_column(matrix[:, t_idx], header[t_idx], schema.get(header[t_idx]))
    names, kinds, cols = [], [], []
    for j, name in enumerate(header):
        if j == t_idx:
            continue
        col = matrix[:, j]
        declared = schema.get(name)
        if declared == "continuous":
            kind = CONTINUOUS
        else:
            kind, col = _infer_kind(col)
            if declared == "categorical" and not kind.is_categorical:
                raise DataError(f"column {name!r} declared categorical but is not integer-valued "
                                f"with 2..{MAX_INFERRED_LEVELS} levels")
        names.append(name)
        kinds.append(kind)
        cols.append(col)
    values = np.column_stack(cols) if cols else np.empty((matrix.shape[0], 0))
    return Dataset(values, names, kinds), target


def save_dataset(ds: Dataset, target: Target | None, dest: str | IO[str], delimiter: str = ",") -> None:
    """Write a header + rows table; floats use ``repr`` so values round-trip exactly."""
    header = list(ds.names)
    cols = [ds.values[:, j] for j in range(ds.n_cols)]
    if target is not None:
        header.append(target.name)
        cols.append(target.values)

    def fmt(v: float) -> str:
        return str(int(v)) if v == int(v) and abs(v) < 2 ** 53 else repr(float(v))

    def write(fh):
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n_rows):
            w.writerow([fmt(c[i]) for c in cols])

    if isinstance(dest, str):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write(fh)
    else:
        write(dest)


@dataclass(frozen=True)
class ColumnStats:
    mean: float | None = None
    variance: float | None = None
    level_histogram: dict[int, int] | None = None


def column_stats(ds: Dataset, j: int) -> ColumnStats:
    """Mean and sample variance (n-1 denominator) of a continuous column, or
    the level histogram of a categorical one."""
    col = ds.column(ds.index_of(j))
    kind = ds.kinds[j]
    if kind.is_categorical:
        counts = np.bincount(col.astype(int), minlength=kind.level_count)
        return ColumnStats(level_histogram={lvl: int(c) for lvl, c in enumerate(counts)})
    var = float(np.var(col, ddof=1)) if col.size > 1 else math.nan
    return ColumnStats(mean=float(np.mean(col)), variance=var)
