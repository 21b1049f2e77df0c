"""Dataset container, wide-CSV ingestion, and fold splitting.

The on-disk layout is one row per choice situation, with per-alternative
attribute columns like cost_1, cost_2, shared person-level columns, and a
single choice column.  SchemaConfig binds columns to roles and carries
filter predicates (pandas query strings), categorical encodings, and the
standardization toggle consumed by the nonlinear estimators.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .distributions import philox_stream
from .errors import ConfigError, SchemaError, ShapeError

STREAM_FOLD = 8


@dataclass(frozen=True)
class Dataset:
    """N choice situations, J alternatives, immutable after construction."""

    alt_vars: dict            # var name -> (N, J) float array
    shared_vars: dict         # var name -> (N,) float array
    y: np.ndarray             # (N,) int choice indices
    alt_names: tuple
    availability: np.ndarray | None = None   # (N, J) bool
    standardize: bool = True

    def __post_init__(self):
        y = np.ascontiguousarray(self.y, dtype=np.int64)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "alt_names", tuple(self.alt_names))
        j = len(self.alt_names)
        n = y.shape[0]
        if n == 0:
            raise ConfigError("dataset is empty")
        alt_vars = {}
        for name, arr in self.alt_vars.items():
            a = np.ascontiguousarray(arr, dtype=np.float64)
            if a.shape != (n, j):
                raise ShapeError(f"alternative variable {name!r} has shape {a.shape}, expected ({n}, {j})")
            if not np.all(np.isfinite(a)):
                raise ConfigError(f"alternative variable {name!r} contains non-finite values")
            a.setflags(write=False)
            alt_vars[name] = a
        shared_vars = {}
        for name, arr in self.shared_vars.items():
            a = np.ascontiguousarray(arr, dtype=np.float64)
            if a.shape != (n,):
                raise ShapeError(f"shared variable {name!r} has shape {a.shape}, expected ({n},)")
            if not np.all(np.isfinite(a)):
                raise ConfigError(f"shared variable {name!r} contains non-finite values")
            a.setflags(write=False)
            shared_vars[name] = a
        object.__setattr__(self, "alt_vars", alt_vars)
        object.__setattr__(self, "shared_vars", shared_vars)
        if np.any((y < 0) | (y >= j)):
            bad = int(np.argmax((y < 0) | (y >= j)))
            raise ConfigError(f"choice index {y[bad]} at row {bad} outside [0, {j})")
        if self.availability is not None:
            av = np.ascontiguousarray(self.availability, dtype=bool)
            if av.shape != (n, j):
                raise ShapeError(f"availability has shape {av.shape}, expected ({n}, {j})")
            if not av[np.arange(n), y].all():
                bad = int(np.argmin(av[np.arange(n), y]))
                raise ConfigError(f"row {bad} chose an unavailable alternative")
            av.setflags(write=False)
            object.__setattr__(self, "availability", av)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def j(self) -> int:
        return len(self.alt_names)

    def has_alt_var(self, name) -> bool:
        return name in self.alt_vars

    def has_shared_var(self, name) -> bool:
        return name in self.shared_vars

    def alt_column(self, name, alt) -> np.ndarray:
        try:
            return self.alt_vars[name][:, alt]
        except KeyError:
            raise SchemaError(f"no alternative variable {name!r}") from None

    def shared_column(self, name) -> np.ndarray:
        try:
            return self.shared_vars[name]
        except KeyError:
            raise SchemaError(f"no shared variable {name!r}") from None

    def observation(self, i) -> dict:
        """Single choice situation as variable name -> length-J array / scalar."""
        obs = {name: arr[i].copy() for name, arr in self.alt_vars.items()}
        obs.update({name: float(arr[i]) for name, arr in self.shared_vars.items()})
        return obs

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(
            alt_vars={k: v[idx] for k, v in self.alt_vars.items()},
            shared_vars={k: v[idx] for k, v in self.shared_vars.items()},
            y=self.y[idx],
            alt_names=self.alt_names,
            availability=None if self.availability is None else self.availability[idx],
            standardize=self.standardize,
        )

    def standardized(self, stats: dict | None = None) -> tuple["Dataset", dict]:
        """Z-score continuous columns; binary 0/1 columns pass through.

        Returns the scaled dataset and the stats used, so held-out data can
        be scaled with training statistics.
        """
        if stats is None:
            stats = {}
            for name, arr in self.alt_vars.items():
                for alt in range(self.j):
                    stats[("alt", name, alt)] = _column_stats(arr[:, alt])
            for name, arr in self.shared_vars.items():
                stats[("shared", name)] = _column_stats(arr)
        alt_vars = {}
        for name, arr in self.alt_vars.items():
            cols = [_apply_stats(arr[:, alt], stats[("alt", name, alt)]) for alt in range(self.j)]
            alt_vars[name] = np.column_stack(cols)
        shared_vars = {name: _apply_stats(arr, stats[("shared", name)])
                       for name, arr in self.shared_vars.items()}
        scaled = Dataset(alt_vars=alt_vars, shared_vars=shared_vars, y=self.y,
                         alt_names=self.alt_names, availability=self.availability,
                         standardize=self.standardize)
        return scaled, stats


def _column_stats(col: np.ndarray):
    vals = np.unique(col)
    if vals.size <= 2 and np.all(np.isin(vals, (0.0, 1.0))):
        return (0.0, 1.0)  # one-hot / binary: leave untouched
    std = float(col.std())
    return (float(col.mean()), std if std > 0 else 1.0)


def _apply_stats(col, ms):
    mean, std = ms
    return (col - mean) / std


@dataclass(frozen=True)
class SchemaConfig:
    """Column-to-role bindings for wide CSV ingestion."""

    alternatives: tuple
    choice_column: str
    alt_var_columns: dict       # var -> tuple of J column names
    shared_columns: tuple = ()
    choice_labels: tuple | None = None   # value per alternative; default 0..J-1
    availability_columns: tuple | None = None
    categorical: dict = field(default_factory=dict)  # shared col -> {"drop": level}
    filters: tuple = ()
    dropna: tuple | bool = ()
    standardize: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alternatives", tuple(self.alternatives))
        object.__setattr__(self, "shared_columns", tuple(self.shared_columns))
        object.__setattr__(self, "filters", tuple(self.filters))
        object.__setattr__(self, "alt_var_columns",
                           {k: tuple(v) for k, v in self.alt_var_columns.items()})
        j = len(self.alternatives)
        if j < 2:
            raise ConfigError("need at least two alternatives")
        for var, cols in self.alt_var_columns.items():
            if len(cols) != j:
                raise ConfigError(f"variable {var!r} binds {len(cols)} columns for {j} alternatives")
        if self.choice_labels is not None:
            labels = tuple(self.choice_labels)
            if len(labels) != j:
                raise ConfigError(f"{len(labels)} choice labels for {j} alternatives")
            object.__setattr__(self, "choice_labels", labels)
        if self.availability_columns is not None:
            cols = tuple(self.availability_columns)
            if len(cols) != j:
                raise ConfigError(f"{len(cols)} availability columns for {j} alternatives")
            object.__setattr__(self, "availability_columns", cols)

    def to_config(self) -> dict:
        out = {
            "alternatives": list(self.alternatives),
            "choice_column": self.choice_column,
            "alt_var_columns": {k: list(v) for k, v in self.alt_var_columns.items()},
            "shared_columns": list(self.shared_columns),
            "standardize": self.standardize,
        }
        if self.choice_labels is not None:
            out["choice_labels"] = list(self.choice_labels)
        if self.availability_columns is not None:
            out["availability_columns"] = list(self.availability_columns)
        if self.categorical:
            out["categorical"] = {k: dict(v) for k, v in self.categorical.items()}
        if self.filters:
            out["filters"] = list(self.filters)
        if self.dropna:
            out["dropna"] = list(self.dropna) if not isinstance(self.dropna, bool) else True
        return out

    @classmethod
    def from_config(cls, cfg: dict) -> "SchemaConfig":
        return cls(
            alternatives=tuple(cfg["alternatives"]),
            choice_column=cfg["choice_column"],
            alt_var_columns={k: tuple(v) for k, v in cfg.get("alt_var_columns", {}).items()},
            shared_columns=tuple(cfg.get("shared_columns", ())),
            choice_labels=tuple(cfg["choice_labels"]) if "choice_labels" in cfg else None,
            availability_columns=tuple(cfg["availability_columns"]) if cfg.get("availability_columns") else None,
            categorical={k: dict(v) for k, v in cfg.get("categorical", {}).items()},
            filters=tuple(cfg.get("filters", ())),
            dropna=cfg.get("dropna", ()) if not isinstance(cfg.get("dropna", ()), bool) else cfg["dropna"],
            standardize=bool(cfg.get("standardize", True)),
        )


@dataclass
class IngestionReport:
    path: str
    rows_read: int
    rows_kept: int
    filter_counts: list      # (expression, rows dropped)
    dropna_dropped: int
    encodings: list          # human-readable notes

    @property
    def rows_dropped(self) -> int:
        return self.rows_read - self.rows_kept

    def lines(self):
        out = [f"read {self.rows_read} rows from {self.path}"]
        for expr, dropped in self.filter_counts:
            out.append(f"filter {expr!r} dropped {dropped} rows")
        if self.dropna_dropped:
            out.append(f"dropped {self.dropna_dropped} rows with missing values")
        out.extend(self.encodings)
        out.append(f"kept {self.rows_kept} rows")
        return out


def _referenced_columns(schema: SchemaConfig):
    cols = [schema.choice_column]
    for colset in schema.alt_var_columns.values():
        cols.extend(colset)
    cols.extend(schema.shared_columns)
    if schema.availability_columns:
        cols.extend(schema.availability_columns)
    return cols


def load_dataset(path, schema: SchemaConfig):
    """Ingest a wide CSV; returns (Dataset, IngestionReport).

    Raises SchemaError naming the offending column (and row where known) on
    unknown columns, unparsable cells, or out-of-range choice values.
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    rows_read = len(frame)
    for col in _referenced_columns(schema):
        if col not in frame.columns:
            raise SchemaError(f"column {col!r} not present in {path}")

    filter_counts = []
    for expr in schema.filters:
        before = len(frame)
        try:
            frame = frame.query(expr)
        except Exception as exc:
            raise ConfigError(f"filter {expr!r} failed: {exc}") from exc
        filter_counts.append((expr, before - len(frame)))

    dropna_dropped = 0
    numeric_cols = [c for c in _referenced_columns(schema)
                    if c != schema.choice_column and c not in schema.categorical]
    if schema.dropna:
        subset = numeric_cols if schema.dropna is True else list(schema.dropna)
        before = len(frame)
        frame = frame.dropna(subset=subset)
        dropna_dropped = before - len(frame)
    if len(frame) == 0:
        raise ConfigError(f"no rows remain after filters in {path}")
    frame = frame.reset_index(drop=True)

    def numeric(col):
        vals = pd.to_numeric(frame[col], errors="coerce")
        bad = vals.isna() & frame[col].notna()
        if bad.any():
            row = int(bad.idxmax())
            raise SchemaError(f"unparsable value {frame[col][row]!r} in column {col!r}, row {row}")
        if vals.isna().any():
            row = int(vals.isna().idxmax())
            raise SchemaError(f"missing value in column {col!r}, row {row} (no dropna rule covers it)")
        return vals.to_numpy(dtype=np.float64)

    j = len(schema.alternatives)
    labels = schema.choice_labels if schema.choice_labels is not None else tuple(range(j))
    label_map = {lab: i for i, lab in enumerate(labels)}
    raw_choice = frame[schema.choice_column]
    y = np.empty(len(frame), dtype=np.int64)
    for row, val in enumerate(raw_choice):
        key = val
        if key not in label_map:
            try:
                key = type(labels[0])(val)
            except (TypeError, ValueError):
                key = val
        if key not in label_map:
            raise SchemaError(
                f"choice value {val!r} in column {schema.choice_column!r}, row {row} "
                f"not among labels {list(labels)}")
        y[row] = label_map[key]

    alt_vars = {var: np.column_stack([numeric(c) for c in cols])
                for var, cols in schema.alt_var_columns.items()}

    encodings = []
    shared_vars = {}
    for col in schema.shared_columns:
        if col in schema.categorical:
            spec = schema.categorical[col]
            series = frame[col]
            levels = spec.get("levels") or sorted(series.dropna().unique().tolist())
            drop = spec.get("drop", levels[0])
            if drop not in levels:
                raise ConfigError(f"reference level {drop!r} not among levels of {col!r}")
            for level in levels:
                if level == drop:
                    continue
                shared_vars[f"{col}_{level}"] = (series == level).to_numpy(dtype=np.float64)
            encodings.append(f"one-hot encoded {col!r} over {levels} (reference {drop!r})")
        else:
            shared_vars[col] = numeric(col)

    availability = None
    if schema.availability_columns:
        availability = np.column_stack(
            [numeric(c) != 0 for c in schema.availability_columns])

    data = Dataset(alt_vars=alt_vars, shared_vars=shared_vars, y=y,
                   alt_names=schema.alternatives, availability=availability,
                   standardize=schema.standardize)
    report = IngestionReport(path=str(path), rows_read=rows_read, rows_kept=data.n,
                             filter_counts=filter_counts, dropna_dropped=dropna_dropped,
                             encodings=encodings)
    return data, report


def canonical_schema(data: Dataset) -> SchemaConfig:
    """Schema matching write_dataset's column layout."""
    return SchemaConfig(
        alternatives=data.alt_names,
        choice_column="choice",
        alt_var_columns={var: tuple(f"{var}_{i + 1}" for i in range(data.j))
                         for var in data.alt_vars},
        shared_columns=tuple(data.shared_vars),
        availability_columns=tuple(f"avail_{i + 1}" for i in range(data.j))
        if data.availability is not None else None,
        standardize=data.standardize,
    )


def write_dataset(data: Dataset, path) -> None:
    """Write the wide-CSV form read back by canonical_schema(data).

    Float cells use shortest round-trip formatting, so a written dataset
    re-reads to bit-identical values.
    """
    import csv

    cols = {}
    for var, arr in data.alt_vars.items():
        for i in range(data.j):
            cols[f"{var}_{i + 1}"] = arr[:, i]
    for var, arr in data.shared_vars.items():
        cols[var] = arr
    if data.availability is not None:
        for i in range(data.j):
            cols[f"avail_{i + 1}"] = data.availability[:, i].astype(int)
    cols["choice"] = data.y
    names = list(cols)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in range(data.n):
            writer.writerow([int(cols[c][row]) if cols[c].dtype.kind in "ib"
                             else repr(float(cols[c][row])) for c in names])


def kfold_split(data: Dataset, k: int, seed: int):
    """Seeded shuffle then contiguous partition into k (train, test) pairs."""
    if k < 2:
        raise ConfigError(f"need k >= 2, got {k}")
    if k > data.n:
        raise ConfigError(f"k = {k} exceeds {data.n} observations")
    order = np.arange(data.n)
    philox_stream(seed, STREAM_FOLD).shuffle(order)
    folds = np.array_split(order, k)
    out = []
    for i in range(k):
        test = np.sort(folds[i])
        train = np.sort(np.concatenate([folds[t] for t in range(k) if t != i]))
        out.append((train, test))
    return out
