"""Categorical feature schemas, tabular loading, binning and one-hot encoding."""
from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class SchemaError(ValueError):
    pass


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Feature:
    name: str
    values: tuple[str, ...]


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered categorical features.

    The feature order is the canonical order every rule follows: a rule always
    assigns the first ``k`` features for some ``k``.
    """

    features: tuple[Feature, ...]
    offsets: tuple[int, ...] = field(init=False, repr=False)
    strides: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate feature names in {names}")
        for f in self.features:
            if len(f.values) < 2:
                raise SchemaError(f"feature {f.name!r} needs at least 2 values, got {list(f.values)}")
            if len(set(f.values)) != len(f.values):
                raise SchemaError(f"duplicate values in feature {f.name!r}")
        offsets, total = [], 0
        for f in self.features:
            offsets.append(total)
            total += len(f.values)
        # strides[k] = number of full assignments below a length-k prefix
        strides = [1] * (len(self.features) + 1)
        for k in range(len(self.features) - 1, -1, -1):
            strides[k] = strides[k + 1] * len(self.features[k].values)
        object.__setattr__(self, "offsets", tuple(offsets))
        object.__setattr__(self, "strides", tuple(strides))

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, Sequence[str]]]) -> "FeatureSchema":
        return cls(tuple(Feature(name, tuple(values)) for name, values in pairs))

    @property
    def m(self) -> int:
        return len(self.features)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(f.values) for f in self.features)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def num_assignments(self) -> int:
        return self.strides[0]

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def value_index(self, feature: int, value: str) -> int:
        try:
            return self.features[feature].values.index(value)
        except ValueError:
            raise DataError(f"unknown value {value!r} for feature {self.features[feature].name!r}") from None

    def validate(self, instance: Sequence[int]) -> None:
        if len(instance) != self.m:
            raise DataError(f"instance has {len(instance)} values, schema has {self.m} features")
        for i, (v, size) in enumerate(zip(instance, self.sizes)):
            if not 0 <= v < size:
                raise DataError(f"value index {v} out of range for feature {self.features[i].name!r}")

    def describe(self, instance: Sequence[int]) -> str:
        return ", ".join(f"{f.name}={f.values[v]}" for f, v in zip(self.features, instance))

    def to_text(self) -> str:
        return "".join(f"{f.name}: {', '.join(f.values)}\n" for f in self.features)


def parse_schema(text: str) -> FeatureSchema:
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, rest = line.partition(":")
        if not sep or not name.strip():
            raise SchemaError(f"line {lineno}: expected 'name: value1, value2, ...', got {raw!r}")
        values = [v.strip() for v in rest.split(",")]
        if any(not v for v in values):
            raise SchemaError(f"line {lineno}: empty value name in {raw!r}")
        pairs.append((name.strip(), values))
    if not pairs:
        raise SchemaError("schema has no features")
    return FeatureSchema.from_pairs(pairs)


def load_schema(path: str | Path) -> FeatureSchema:
    return parse_schema(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# one-hot encoding


def encode_one_hot(instance: Sequence[int], schema: FeatureSchema) -> np.ndarray:
    schema.validate(instance)
    x = np.zeros(schema.n)
    for off, v in zip(schema.offsets, instance):
        x[off + v] = 1.0
    return x


def encode_many(instances: np.ndarray, schema: FeatureSchema) -> np.ndarray:
    """One-hot encode an ``(N, m)`` integer matrix into an ``(N, n)`` float matrix."""
    instances = np.asarray(instances, dtype=np.int64).reshape(-1, schema.m)
    X = np.zeros((len(instances), schema.n))
    rows = np.arange(len(instances))
    for i, off in enumerate(schema.offsets):
        X[rows, off + instances[:, i]] = 1.0
    return X


def decode_one_hot(x: Sequence[float], schema: FeatureSchema) -> tuple[int, ...]:
    x = np.asarray(x)
    out = []
    for f, off in zip(schema.features, schema.offsets):
        block = x[off: off + len(f.values)]
        hot = np.flatnonzero(block == 1)
        if len(hot) != 1 or np.count_nonzero(block) != 1:
            raise DataError(f"block for feature {f.name!r} is not one-hot: {block.tolist()}")
        out.append(int(hot[0]))
    return tuple(out)


def all_instances(schema: FeatureSchema) -> np.ndarray:
    """Every full assignment, in lexicographic (mixed-radix) order."""
    codes = np.arange(schema.num_assignments, dtype=np.int64)
    return decode_codes(codes, schema)


def encode_codes(instances: np.ndarray, schema: FeatureSchema) -> np.ndarray:
    """Mixed-radix code of each instance; lexicographic order equals code order."""
    instances = np.asarray(instances, dtype=np.int64).reshape(-1, schema.m)
    return instances @ np.asarray(schema.strides[1:], dtype=np.int64)


def decode_codes(codes: np.ndarray, schema: FeatureSchema) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    out = np.empty((len(codes), schema.m), dtype=np.int64)
    for i, size in enumerate(schema.sizes):
        out[:, i] = (codes // schema.strides[i + 1]) % size
    return out


# ---------------------------------------------------------------------------
# numeric discretization


def fit_bin_edges(column: Sequence[float], bins: int) -> np.ndarray:
    """Equal-frequency bin edges for left-closed / right-open intervals.

    Edges are chosen greedily left to right; each cut sits on a distinct value
    so that tied values never straddle a boundary, and the bin it closes holds
    as close as possible to an equal share of the rows not yet binned. On
    columns without ties this is the plain quantile split. Ties between
    candidate cuts go to the lower one.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    values = np.sort(np.asarray(column, dtype=float))
    if values.size == 0:
        raise ValueError("cannot bin an empty column")
    if not np.all(np.isfinite(values)):
        raise ValueError("column contains non-finite values")
    distinct = np.unique(values)
    if distinct.size < bins:
        log.warning("column has %d distinct values, fewer than %d bins; using one bin per value",
                    distinct.size, bins)
        return distinct[1:]
    below = np.searchsorted(values, distinct, side="left")  # rows strictly below each candidate
    edges: list[float] = []
    start, lo = 0, 0  # rows already binned; first candidate index
    for remaining_bins in range(bins, 1, -1):
        target = start + (values.size - start) / remaining_bins
        # a cut must leave the current bin non-empty and leave enough
        # distinct values for the bins that follow
        hi = distinct.size - remaining_bins + 1
        cands = np.arange(lo + 1, hi + 1)
        if cands.size == 0:
            break
        best = cands[np.argmin(np.abs(below[cands] - target))]
        edges.append(float(distinct[best]))
        start, lo = int(below[best]), int(best)
    if len(edges) < bins - 1:
        log.warning("column collapsed to %d bins instead of %d", len(edges) + 1, bins)
    return np.asarray(edges)


def apply_bin_edges(column: Sequence[float], edges: Sequence[float]) -> np.ndarray:
    # left-closed: a value equal to an edge goes to the upper bin; values
    # outside the fitted range clamp to the first / last bin
    return np.searchsorted(np.asarray(edges, dtype=float), np.asarray(column, dtype=float), side="right")


def discretize_numeric(column: Sequence[float], bins: int) -> tuple[np.ndarray, np.ndarray]:
    edges = fit_bin_edges(column, bins)
    return apply_bin_edges(column, edges), edges


def parse_binning_spec(text: str) -> dict[str, int]:
    """``column: numeric, bins=3`` lines -> {column: bins}."""
    spec = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, _, rest = line.partition(":")
        parts = [p.strip() for p in rest.split(",")]
        if not parts or parts[0] != "numeric":
            raise SchemaError(f"binning line {lineno}: expected 'name: numeric, bins=K', got {raw!r}")
        bins = 3
        for p in parts[1:]:
            key, _, val = p.partition("=")
            if key.strip() == "bins":
                bins = int(val)
        spec[name.strip()] = bins
    return spec


def load_binning_spec(path: str | Path) -> dict[str, int]:
    return parse_binning_spec(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# datasets


@dataclass(frozen=True)
class Dataset:
    schema: FeatureSchema
    X: np.ndarray  # (N, m) value indices
    y: np.ndarray  # (N,) labels in {0, 1}
    split: str = "all"

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.int64).reshape(-1, self.schema.m)
        y = np.asarray(self.y, dtype=np.int64).reshape(-1)
        if len(X) != len(y):
            raise DataError("instance and label counts differ")
        if len(X) and (np.any(X < 0) or np.any(X >= np.asarray(self.schema.sizes))):
            raise DataError("instance value index out of range")
        if np.any((y != 0) & (y != 1)):
            raise DataError("labels must be 0 or 1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return len(self.y)

    def one_hot(self) -> np.ndarray:
        return encode_many(self.X, self.schema)

    def subset(self, idx, split: str | None = None) -> "Dataset":
        return Dataset(self.schema, self.X[idx], self.y[idx], split or self.split)


@dataclass
class Table:
    """Raw CSV contents before encoding."""

    header: list[str]
    rows: list[list[str]]

    def column(self, name: str) -> list[str]:
        try:
            j = self.header.index(name)
        except ValueError:
            raise DataError(f"missing column {name!r}") from None
        return [r[j] for r in self.rows]

    def take(self, idx: Sequence[int]) -> "Table":
        return Table(self.header, [self.rows[i] for i in idx])


def read_table(path: str | Path) -> Table:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row required") from None
        rows = [[c.strip() for c in row] for row in reader if row]
    for i, row in enumerate(rows, 2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} fields, header has {len(header)}")
    return Table(header, rows)


def parse_labels(raw: Sequence[str], positive: str | None = None) -> np.ndarray:
    out = np.empty(len(raw), dtype=np.int64)
    for i, v in enumerate(raw):
        if positive is not None:
            out[i] = int(v == positive)
        elif v in ("0", "1"):
            out[i] = int(v)
        else:
            raise DataError(f"row {i + 2}: unparseable label {v!r} (expected 0/1 or a declared positive class)")
    return out


def fit_binning(table: Table, spec: dict[str, int]) -> dict[str, list[float]]:
    edges = {}
    for name, bins in spec.items():
        try:
            col = [float(v) for v in table.column(name)]
        except ValueError as exc:
            raise DataError(f"column {name!r}: {exc}") from None
        edges[name] = fit_bin_edges(col, bins).tolist()
    return edges


def table_to_dataset(table: Table, schema: FeatureSchema, label: str, *, positive: str | None = None,
                     edges: dict[str, Sequence[float]] | None = None, split: str = "all") -> Dataset:
    edges = edges or {}
    X = np.empty((len(table.rows), schema.m), dtype=np.int64)
    errors = []
    for i, f in enumerate(schema.features):
        col = table.column(f.name)
        if f.name in edges:
            try:
                idx = apply_bin_edges([float(v) for v in col], edges[f.name])
            except ValueError as exc:
                raise DataError(f"column {f.name!r}: {exc}") from None
            if len(idx) and idx.max() >= len(f.values):
                raise DataError(f"column {f.name!r}: {len(edges[f.name]) + 1} bins but {len(f.values)} values")
            X[:, i] = idx
            continue
        lookup = {v: j for j, v in enumerate(f.values)}
        for r, v in enumerate(col):
            j = lookup.get(v)
            if j is None:
                errors.append(f"row {r + 2}, column {f.name!r}: unknown value {v!r}")
            else:
                X[r, i] = j
    if errors:
        shown = "; ".join(errors[:20])
        more = f" (and {len(errors) - 20} more)" if len(errors) > 20 else ""
        raise DataError(f"{len(errors)} unknown categorical values: {shown}{more}")
    y = parse_labels(table.column(label), positive)
    if not len(y):
        log.warning("dataset has no rows")
    return Dataset(schema, X, y, split)


def load_csv(path: str | Path, schema: FeatureSchema, label: str, *, positive: str | None = None,
             edges: dict[str, Sequence[float]] | None = None, split: str = "all") -> Dataset:
    return table_to_dataset(read_table(path), schema, label, positive=positive, edges=edges, split=split)


def split_indices(n: int, test_fraction: float = 0.2, seed: int = 42) -> tuple[list[int], list[int]]:
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    idx = list(range(n))
    random.Random(seed).shuffle(idx)
    n_test = int(math.floor(n * test_fraction + 0.5))
    return sorted(idx[n_test:]), sorted(idx[:n_test])


def load_split(path: str | Path, schema: FeatureSchema, label: str, *, positive: str | None = None,
               binning: dict[str, int] | None = None, test_fraction: float = 0.2,
               seed: int = 42) -> tuple[Dataset, Dataset, dict[str, list[float]]]:
    """Read a CSV, split train/test, fit bin edges on the train rows only."""
    table = read_table(path)
    tr, te = split_indices(len(table.rows), test_fraction, seed)
    train_t, test_t = table.take(tr), table.take(te)
    edges = fit_binning(train_t, binning or {})
    train = table_to_dataset(train_t, schema, label, positive=positive, edges=edges, split="train")
    test = table_to_dataset(test_t, schema, label, positive=positive, edges=edges, split="test")
    return train, test, edges
