"""Prefix rules, linear behaviors and annotated rule lists.

A rule assigns values to the first ``k`` features of the schema, so it is
stored densely as a tuple of ``k`` value indices. Inside a list it is stored as
the mixed-radix code of its first completion (``lo``) plus its length; the
full assignments matching it are then exactly the codes in
``[lo, lo + strides[k])``. Lexicographic order of rules is the order of
``lo``, and a sorted list is prefix-free and covering iff those intervals tile
``[0, num_assignments)``.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .schema import Dataset, FeatureSchema, encode_codes

Rule = tuple  # tuple[int, ...]: value index of feature 0, 1, ..., k-1


class RuleListError(RuntimeError):
    """A rule list violates its prefix-free / covering invariants."""


def match(rule: Sequence[int], instance: Sequence[int]) -> bool:
    return tuple(instance[:len(rule)]) == tuple(rule)


def is_prefix(a: Sequence[int], b: Sequence[int]) -> bool:
    return len(a) <= len(b) and tuple(b[:len(a)]) == tuple(a)


def conjoin(r1: Sequence[int], r2: Sequence[int]) -> Rule | None:
    """AND of two prefix rules: the longer one if compatible, else None."""
    short, long_ = (r1, r2) if len(r1) <= len(r2) else (r2, r1)
    return tuple(long_) if is_prefix(short, long_) else None


def rule_code(rule: Sequence[int], schema: FeatureSchema) -> int:
    return sum(v * schema.strides[i + 1] for i, v in enumerate(rule))


def code_rule(lo: int, length: int, schema: FeatureSchema) -> Rule:
    return tuple(int(lo // schema.strides[i + 1]) % schema.sizes[i] for i in range(int(length)))


def format_rule(rule: Sequence[int], schema: FeatureSchema) -> str:
    if not rule:
        return "TRUE"
    return " AND ".join(f"{schema.features[i].name}={schema.features[i].values[v]}" for i, v in enumerate(rule))


def parse_rule(text: str, schema: FeatureSchema) -> Rule:
    text = text.strip()
    if text == "TRUE":
        return ()
    rule = []
    for i, term in enumerate(text.split(" AND ")):
        name, _, value = term.strip().partition("=")
        if i >= schema.m or name != schema.features[i].name:
            raise ValueError(f"term {term!r} out of canonical feature order")
        rule.append(schema.value_index(i, value))
    return tuple(rule)


@dataclass(frozen=True)
class Behavior:
    """A linear function over the one-hot input."""

    weights: np.ndarray
    bias: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise ValueError("behavior must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @classmethod
    def zero(cls, n: int) -> "Behavior":
        return cls(np.zeros(n), 0.0)

    def __call__(self, x) -> float:
        return evaluate_behavior(self, x)


def evaluate_behavior(b: Behavior, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != b.weights.shape:
        raise ValueError(f"input width {x.shape} != behavior width {b.weights.shape}")
    return float(b.weights @ x + b.bias)


@dataclass(frozen=True, eq=False)
class RuleList:
    """A sorted list of prefix rules annotated with behaviors or classes.

    Behavior lists keep a table of distinct linear functions (``weights``,
    ``biases``) and a per-entry row index ``source``; ``-1`` marks the zero
    behavior of an inactive ReLU. Class lists carry ``labels`` instead.
    """

    schema: FeatureSchema
    lo: np.ndarray
    length: np.ndarray
    source: np.ndarray | None = None
    weights: np.ndarray | None = None
    biases: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=np.int64))
        object.__setattr__(self, "length", np.asarray(self.length, dtype=np.int64))
        if self.lo.shape != self.length.shape:
            raise ValueError("lo / length shape mismatch")
        if (self.labels is None) == (self.source is None):
            raise ValueError("rule list needs exactly one of labels or behaviors")
        if self.labels is not None:
            object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))

    # -- construction --------------------------------------------------------

    @classmethod
    def from_entries(cls, schema: FeatureSchema, entries: Iterable[tuple[Sequence[int], object]]) -> "RuleList":
        """Build from ``(rule, Behavior | None | class)`` pairs; sorts lexicographically.

        ``None`` as a behavior stands for the zero behavior.
        """
        entries = sorted(((tuple(r), p) for r, p in entries), key=lambda e: e[0])
        lo = [rule_code(r, schema) for r, _ in entries]
        length = [len(r) for r, _ in entries]
        if entries and all(isinstance(p, (int, np.integer)) for _, p in entries):
            return cls(schema, lo, length, labels=[int(p) for _, p in entries])
        W, B, src = [], [], []
        for _, p in entries:
            if p is None:
                src.append(-1)
            else:
                src.append(len(W))
                W.append(p.weights)
                B.append(p.bias)
        W = np.asarray(W, dtype=np.float64).reshape(-1, schema.n)
        return cls(schema, lo, length, source=np.asarray(src, dtype=np.int64), weights=W,
                   biases=np.asarray(B, dtype=np.float64))

    # -- basic access --------------------------------------------------------

    def __len__(self) -> int:
        return len(self.lo)

    @property
    def is_class_list(self) -> bool:
        return self.labels is not None

    @property
    def hi(self) -> np.ndarray:
        return self.lo + np.asarray(self.schema.strides, dtype=np.int64)[self.length]

    def rule(self, i: int) -> Rule:
        return code_rule(self.lo[i], self.length[i], self.schema)

    def rules(self) -> list[Rule]:
        return [self.rule(i) for i in range(len(self))]

    def behavior(self, i: int) -> Behavior:
        if self.source is None:
            raise TypeError("class list has no behaviors")
        s = self.source[i]
        if s < 0:
            return Behavior.zero(self.schema.n)
        return Behavior(self.weights[s], self.biases[s])

    def entries(self) -> list[tuple[Rule, object]]:
        if self.labels is not None:
            return [(self.rule(i), int(self.labels[i])) for i in range(len(self))]
        return [(self.rule(i), self.behavior(i)) for i in range(len(self))]

    def positive(self) -> "RuleList":
        if self.labels is None:
            raise TypeError("positive() needs a class list")
        keep = self.labels == 1
        return RuleList(self.schema, self.lo[keep], self.length[keep], labels=self.labels[keep])

    def with_labels(self, labels) -> "RuleList":
        return RuleList(self.schema, self.lo, self.length, labels=np.asarray(labels))

    # -- invariants ----------------------------------------------------------

    def partition_violation(self) -> str | None:
        """Why the list is not a sorted prefix-free covering, or None."""
        total = self.schema.num_assignments
        if len(self) == 0:
            return "empty rule list covers nothing"
        if np.any(self.length < 0) or np.any(self.length > self.schema.m):
            return "rule length out of range"
        lo, hi = self.lo, self.hi
        stride = np.asarray(self.schema.strides, dtype=np.int64)[self.length]
        if np.any(lo % stride):
            return "rule code is not aligned to its length"
        if lo[0] != 0:
            return f"assignments [0, {lo[0]}) match no rule"
        if hi[-1] != total:
            return f"assignments [{hi[-1]}, {total}) match no rule" if hi[-1] < total else "rule beyond space"
        bad = np.flatnonzero(hi[:-1] != lo[1:])
        if bad.size:
            i = int(bad[0])
            a, b = format_rule(self.rule(i), self.schema), format_rule(self.rule(i + 1), self.schema)
            kind = "overlap (prefix or order violation)" if hi[i] > lo[i + 1] else "gap"
            return f"{kind} between entries {i} [{a}] and {i + 1} [{b}]"
        return None

    @cached_property
    def _violation(self) -> str | None:
        return self.partition_violation()

    def check_partition(self) -> None:
        if self._violation is not None:
            raise RuleListError(self._violation)

    def is_partition(self) -> bool:
        return self._violation is None

    # -- lookup --------------------------------------------------------------

    def lookup_codes(self, codes) -> np.ndarray:
        """Index of the unique entry matching each full-assignment code."""
        self.check_partition()
        codes = np.asarray(codes, dtype=np.int64)
        idx = np.searchsorted(self.lo, codes, side="right") - 1
        if np.any(idx < 0) or np.any(codes >= self.hi[idx]):
            raise RuleListError("instance matches no rule")
        return idx

    def lookup_many(self, instances) -> np.ndarray:
        return self.lookup_codes(encode_codes(instances, self.schema))

    def predict_many(self, instances) -> np.ndarray:
        if self.labels is None:
            raise TypeError("predict needs a class list")
        return self.labels[self.lookup_many(instances)]

    def evaluate_many(self, instances) -> np.ndarray:
        """Value of the matching entry's behavior at each instance."""
        instances = np.asarray(instances, dtype=np.int64).reshape(-1, self.schema.m)
        src = self.source[self.lookup_many(instances)]
        out = np.zeros(len(instances))
        act = src >= 0
        W, b = self.weights[src[act]], self.biases[src[act]]
        # one-hot dot product: sum the selected coordinate of each feature block
        acc = np.zeros(int(act.sum()))
        for i, off in enumerate(self.schema.offsets):
            acc = acc + W[np.arange(len(W)), off + instances[act, i]]
        out[act] = acc + b
        return out


def rule_list_lookup(rl: RuleList, instance: Sequence[int]):
    """The unique ``(rule, payload)`` entry matching a full instance."""
    rl.schema.validate(instance)
    i = int(rl.lookup_many(np.asarray([instance]))[0])
    if rl.labels is not None:
        return rl.rule(i), int(rl.labels[i])
    return rl.rule(i), rl.behavior(i)


# ---------------------------------------------------------------------------
# conjunction of sorted rule lists


def conjoin_sorted(a_lo, a_len, b_lo, b_len, strides) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Two-pointer AND of two sorted prefix-free rule lists.

    Returns ``(lo, length, ia, ib)``: every non-null conjunction in sorted
    order and, for each, the index of its source rule in each input.
    """
    a_lo, a_len, b_lo, b_len = (np.asarray(v).tolist() for v in (a_lo, a_len, b_lo, b_len))
    strides = list(strides)
    out_lo, out_len, ia, ib = [], [], [], []
    i = j = 0
    na, nb = len(a_lo), len(b_lo)
    while i < na and j < nb:
        la, lb = a_len[i], b_len[j]
        # the shorter rule is a prefix of the longer iff the longer one's
        # first completion falls inside the shorter one's interval
        if la <= lb and a_lo[i] <= b_lo[j] < a_lo[i] + strides[la]:
            out_lo.append(b_lo[j]); out_len.append(lb); ia.append(i); ib.append(j)
            if la == lb:
                i += 1
            j += 1
        elif lb < la and b_lo[j] <= a_lo[i] < b_lo[j] + strides[lb]:
            out_lo.append(a_lo[i]); out_len.append(la); ia.append(i); ib.append(j)
            i += 1
        elif (a_lo[i], la) < (b_lo[j], lb):
            i += 1
        else:
            j += 1
    return (np.asarray(out_lo, dtype=np.int64), np.asarray(out_len, dtype=np.int64),
            np.asarray(ia, dtype=np.int64), np.asarray(ib, dtype=np.int64))


# ---------------------------------------------------------------------------
# support


def support(rule: Sequence[int], data: Dataset) -> int:
    k = len(rule)
    if k == 0:
        return len(data)
    return int(np.count_nonzero(np.all(data.X[:, :k] == np.asarray(rule), axis=1)))


def support_counts(rl: RuleList, data: Dataset) -> np.ndarray:
    """Training rows matched by each entry, via sorted instance codes."""
    codes = np.sort(encode_codes(data.X, rl.schema))
    return np.searchsorted(codes, rl.hi, side="left") - np.searchsorted(codes, rl.lo, side="left")


# ---------------------------------------------------------------------------
# rule-list files

_LINE = re.compile(r"^(?P<rule>.*?)\s*=>\s*(?P<cls>[01])(?:\s*\(support=(?P<sup>\d+)\))?\s*$")


def format_rule_list(rl: RuleList, supports=None) -> str:
    lines = []
    for i in range(len(rl)):
        s = f" (support={int(supports[i])})" if supports is not None else ""
        lines.append(f"{format_rule(rl.rule(i), rl.schema)} => {int(rl.labels[i])}{s}")
    return "\n".join(lines) + "\n"


def parse_rule_list(text: str, schema: FeatureSchema) -> tuple[RuleList, np.ndarray | None]:
    entries, sups = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        m = _LINE.match(raw.strip())
        if not m:
            raise ValueError(f"line {lineno}: cannot parse rule {raw!r}")
        entries.append((parse_rule(m["rule"], schema), int(m["cls"])))
        sups.append(None if m["sup"] is None else int(m["sup"]))
    rl = RuleList.from_entries(schema, entries)
    order = sorted(range(len(entries)), key=lambda k: entries[k][0])
    sups = [sups[k] for k in order]
    return rl, (None if any(s is None for s in sups) else np.asarray(sups))


def rule_list_to_json(rl: RuleList, supports=None) -> dict:
    return {
        "features": [{"name": f.name, "values": list(f.values)} for f in rl.schema.features],
        "rules": [
            {"terms": [[rl.schema.features[i].name, rl.schema.features[i].values[v]] for i, v in enumerate(rl.rule(k))],
             "class": int(rl.labels[k]),
             **({"support": int(supports[k])} if supports is not None else {})}
            for k in range(len(rl))
        ],
    }


def rule_list_from_json(d: dict, schema: FeatureSchema) -> tuple[RuleList, np.ndarray | None]:
    if [f["name"] for f in d["features"]] != schema.names:
        raise ValueError("rule file features do not match the schema")
    entries, sups = [], []
    for r in d["rules"]:
        rule = []
        for i, (name, value) in enumerate(r["terms"]):
            if name != schema.features[i].name:
                raise ValueError(f"term {name}={value} out of canonical feature order")
            rule.append(schema.value_index(i, value))
        entries.append((tuple(rule), int(r["class"])))
        sups.append(r.get("support"))
    rl = RuleList.from_entries(schema, entries)
    order = sorted(range(len(entries)), key=lambda k: entries[k][0])
    sups = [sups[k] for k in order]
    return rl, (None if any(s is None for s in sups) else np.asarray(sups))


def save_rule_list(rl: RuleList, path: str | Path, supports=None) -> None:
    """Write ``path`` (text) and ``path`` + ``.json`` (structured mirror)."""
    path = Path(path)
    path.write_text(format_rule_list(rl, supports), encoding="utf-8")
    Path(str(path) + ".json").write_text(json.dumps(rule_list_to_json(rl, supports), indent=1) + "\n",
                                         encoding="utf-8")


def load_rule_list(path: str | Path, schema: FeatureSchema) -> tuple[RuleList, np.ndarray | None]:
    path = Path(path)
    if path.suffix == ".json":
        return rule_list_from_json(json.loads(path.read_text(encoding="utf-8")), schema)
    return parse_rule_list(path.read_text(encoding="utf-8"), schema)
