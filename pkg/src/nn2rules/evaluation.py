"""Fidelity and accuracy metrics, exhaustive verification, support pruning, tradeoff curves."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from typing import Protocol, Sequence

import numpy as np

from .model import Network, predict_batch
from .rules import RuleList, support_counts
from .schema import Dataset, FeatureSchema, decode_codes, encode_codes, encode_many

log = logging.getLogger(__name__)

DEFAULT_CAP = 1_000_000


class Classifier(Protocol):
    def predict_many(self, instances) -> np.ndarray: ...


def net_predict(net: Network, instances, schema: FeatureSchema) -> np.ndarray:
    return predict_batch(net, encode_many(instances, schema))


def fidelity(model: Classifier, net: Network, instances, schema: FeatureSchema) -> float:
    instances = np.asarray(instances, dtype=np.int64).reshape(-1, schema.m)
    if not len(instances):
        raise ValueError("fidelity needs at least one instance")
    agree = model.predict_many(instances) == net_predict(net, instances, schema)
    return int(agree.sum()) / len(instances)


def accuracy(model: Classifier, data: Dataset) -> float:
    if not len(data):
        raise ValueError("accuracy needs at least one row")
    return int((model.predict_many(data.X) == data.y).sum()) / len(data)


def error_set_fidelity(model: Classifier, net: Network, test: Dataset) -> tuple[float, bool]:
    """Fidelity on the rows the network gets wrong; ``(1.0, True)`` if there are none."""
    if not len(test):
        raise ValueError("error-set fidelity needs a non-empty test set")
    wrong = net_predict(net, test.X, test.schema) != test.y
    if not wrong.any():
        return 1.0, True
    return fidelity(model, net, test.X[wrong], test.schema), False


class NetworkClassifier:
    def __init__(self, net: Network, schema: FeatureSchema):
        self.net, self.schema = net, schema

    def predict_many(self, instances) -> np.ndarray:
        return net_predict(self.net, instances, self.schema)


# ---------------------------------------------------------------------------
# exhaustive verification


@dataclass
class VerifyResult:
    passed: bool
    checked: int
    mismatches: int
    counterexamples: list[tuple[int, ...]] = field(default_factory=list)
    sampled: bool = False


class VerificationCapExceeded(RuntimeError):
    pass


def verify_exhaustive(rules: RuleList, net: Network, schema: FeatureSchema, *, cap: int = DEFAULT_CAP,
                      sample: int | None = None, seed: int = 0, max_counterexamples: int = 100,
                      chunk: int = 1 << 17) -> VerifyResult:
    """Compare rule-list classes with network predictions on every full assignment.

    With ``sample`` set, a space above ``cap`` is checked on that many
    uniformly drawn assignments instead of being refused.
    """
    total = schema.num_assignments
    if total > cap:
        if sample is None:
            raise VerificationCapExceeded(f"{total} assignments exceed the cap of {cap}; pass a sample size")
        codes_all = np.sort(np.random.default_rng(seed).choice(total, size=min(sample, total), replace=False))
        sampled = True
    else:
        codes_all = None
        sampled = False
    n_codes = total if codes_all is None else len(codes_all)
    bad, mismatches = [], 0
    for start in range(0, n_codes, chunk):
        if codes_all is None:
            codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        else:
            codes = codes_all[start:start + chunk]
        X = decode_codes(codes, schema)
        diff = rules.predict_many(X) != net_predict(net, X, schema)
        mismatches += int(diff.sum())
        for row in X[diff][:max(0, max_counterexamples - len(bad))]:
            bad.append(tuple(int(v) for v in row))
    return VerifyResult(mismatches == 0, n_codes, mismatches, bad, sampled)


# ---------------------------------------------------------------------------
# support-ordered rules


@dataclass(frozen=True, eq=False)
class SupportRules:
    """Positive rules in decreasing train support, predicting 0 outside them."""

    schema: FeatureSchema
    lo: np.ndarray
    length: np.ndarray
    supports: np.ndarray

    def __len__(self):
        return len(self.lo)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + np.asarray(self.schema.strides, dtype=np.int64)[self.length]

    def rules(self):
        from .rules import code_rule
        return [code_rule(lo, k, self.schema) for lo, k in zip(self.lo, self.length)]

    def top(self, k: int) -> "SupportRules":
        return SupportRules(self.schema, self.lo[:k], self.length[:k], self.supports[:k])

    def nonzero(self) -> "SupportRules":
        return self.top(int(np.count_nonzero(self.supports)))

    def predict_many(self, instances) -> np.ndarray:
        codes = encode_codes(instances, self.schema)
        if not len(self):
            return np.zeros(len(codes), dtype=np.int64)
        order = np.argsort(self.lo)
        lo, hi = self.lo[order], self.hi[order]
        idx = np.searchsorted(lo, codes, side="right") - 1
        inside = (idx >= 0) & (codes < hi[np.maximum(idx, 0)])
        return inside.astype(np.int64)

    def as_rule_list(self) -> RuleList:
        """Class-1 entries only, in lexicographic order (not a covering list)."""
        order = np.argsort(self.lo)
        return RuleList(self.schema, self.lo[order], self.length[order], labels=np.ones(len(self), np.int64))


def support_ordered(full: RuleList, train: Dataset) -> SupportRules:
    """All positive rules of ``full`` sorted by decreasing train support, ties lexicographic."""
    pos = full.positive()
    sup = support_counts(pos, train)
    order = np.lexsort((pos.lo, -sup))
    return SupportRules(full.schema, pos.lo[order], pos.length[order], sup[order])


def prune_by_support(full: RuleList, train: Dataset) -> SupportRules:
    return support_ordered(full, train).nonzero()


@dataclass(frozen=True)
class CurvePoint:
    percent: float
    num_rules: int
    fidelity: float
    accuracy: float


def tradeoff_curve(ordered: SupportRules, net: Network, data: Dataset,
                   percents: Sequence[float] | None = None) -> list[CurvePoint]:
    """Fidelity and accuracy of the top ``percent``% support-ordered rules.

    0% predicts everything negative; 100% with all positive rules of a full
    list reproduces that list exactly.
    """
    if percents is None:
        percents = range(0, 101, 5)
    K = len(ordered)
    points = []
    for p in percents:
        k = min(K, int(np.floor(p * K / 100.0 + 0.5)))
        top = ordered.top(k)
        points.append(CurvePoint(float(p), k, fidelity(top, net, data.X, data.schema), accuracy(top, data)))
    return points


# ---------------------------------------------------------------------------
# report


@dataclass
class MetricsReport:
    fidelity: float
    accuracy: float
    error_set_fidelity: float
    rule_count_full: int
    rule_count_support: int
    num_rules_max: int
    num_rules_memorization: int
    no_errors: bool = False

    def __post_init__(self):
        for name in ("fidelity", "accuracy", "error_set_fidelity"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)


def num_rules_max(schema: FeatureSchema) -> int:
    return int(np.prod(schema.sizes, dtype=object))


def num_rules_memorization(train: Dataset) -> int:
    """Distinct positive training instances."""
    pos = train.X[train.y == 1]
    return int(len(np.unique(encode_codes(pos, train.schema)))) if len(pos) else 0


def metrics_report(model: Classifier, net: Network, test: Dataset, train: Dataset, full: RuleList) -> MetricsReport:
    esf, empty = error_set_fidelity(model, net, test)
    return MetricsReport(
        fidelity=fidelity(model, net, test.X, test.schema),
        accuracy=accuracy(model, test),
        error_set_fidelity=esf,
        rule_count_full=int(full.labels.sum()),
        rule_count_support=len(prune_by_support(full, train)),
        num_rules_max=num_rules_max(test.schema),
        num_rules_memorization=num_rules_memorization(train),
        no_errors=empty,
    )
