"""Exact decomposition of a ReLU network into prefix rule lists.

Every hidden neuron is turned into a sorted, prefix-free, covering list of
``(rule, behavior)`` pairs: inside each rule's region the neuron equals the
attached linear function of the one-hot input. The first layer comes straight
from the neuron's weights (:func:`lin_rule`); later layers conjoin the input
neurons' lists, combine their behaviors linearly and split each region again
by the sign of the combined pre-activation (:func:`neuron_rule`). The sign of
the output pre-activation gives the class.

Region splitting works on canonical weights: within each feature block the
block minimum is subtracted (and moved into the bias), so every weight is
non-negative and the pre-activation is ``S - tau`` where ``S`` is the sum of
the chosen canonical weights. A prefix is decided positive once its partial
sum reaches ``tau`` (unchosen blocks add at least 0), and negative once even
the largest completion stays below ``tau``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Network
from .rules import Behavior, RuleList, conjoin, conjoin_sorted, rule_code
from .schema import FeatureSchema

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# canonical weight buckets


@dataclass(frozen=True)
class WeightBuckets:
    """Canonical form of a linear function over one-hot features.

    ``weights[i]`` holds feature ``i``'s shifted weights sorted descending
    (stable, so equal weights keep schema order) with minimum 0;
    ``values[i][p]`` is the schema value index at sorted position ``p``.
    """

    weights: tuple[tuple[float, ...], ...]
    values: tuple[tuple[int, ...], ...]
    bias: float

    @classmethod
    def from_canonical(cls, weights: Sequence[Sequence[float]], bias: float = 0.0) -> "WeightBuckets":
        """Wrap buckets that are already non-negative; sorts them and records the order."""
        ws, vs = [], []
        for bucket in weights:
            order = sorted(range(len(bucket)), key=lambda p: -bucket[p])
            ws.append(tuple(float(bucket[p]) for p in order))
            vs.append(tuple(order))
        return cls(tuple(ws), tuple(vs), float(bias))

    @property
    def m(self) -> int:
        return len(self.weights)

    def value(self, assignment: Sequence[int]) -> float:
        """Bias plus the canonical weights selected by a full assignment."""
        total = 0.0
        for i, v in enumerate(assignment):
            total += self.weights[i][self.values[i].index(v)]
        return total + self.bias


def canonicalize(behavior: Behavior, schema: FeatureSchema) -> WeightBuckets:
    w = np.asarray(behavior.weights, dtype=np.float64)
    if w.shape != (schema.n,):
        raise ValueError(f"behavior width {w.shape} != schema width {schema.n}")
    ws, vs = [], []
    bias = float(behavior.bias)
    for off, size in zip(schema.offsets, schema.sizes):
        block = w[off:off + size]
        lowest = block.min()
        bias += lowest
        order = sorted(range(size), key=lambda p: -block[p])
        ws.append(tuple(float(block[p] - lowest) for p in order))
        vs.append(tuple(order))
    return WeightBuckets(tuple(ws), tuple(vs), bias)


# ---------------------------------------------------------------------------
# SelectWeights


def _meets(s: float, tau: float, strict: bool) -> bool:
    return s > tau if strict else s >= tau


def _upper(weights, start: int, s: float) -> float:
    for bucket in weights[start:]:
        s += bucket[0]
    return s


def _select_swap(weights, start: int, s: float, tau: float, strict: bool) -> list[tuple[int, ...]]:
    """Minimal suffixes over buckets ``start:`` lifting partial sum ``s`` to ``tau``.

    Rules taking the top value of the first bucket come from recursion on the
    remaining buckets. Rules taking the ``i``-th value are found by swapping
    the lead term of the rules for value ``i - 1`` (the preconditions) and
    growing each swapped rule until it crosses the threshold again; since
    weights descend, every such rule extends some swapped precondition.
    """
    if _meets(s, tau, strict):
        return [()]
    if not _meets(_upper(weights, start, s), tau, strict):
        return []
    first = weights[start]
    pre = [(0,) + suf for suf in _select_swap(weights, start + 1, s + first[0], tau, strict)]
    found = list(pre)
    for i in range(1, len(first)):
        grown = []
        for rule in pre:
            k = len(rule)
            t = s + first[i]
            for d in range(1, k):
                t += weights[start + d][rule[d]]
            grown.extend((i,) + rule[1:] + ext for ext in _select_swap(weights, start + k, t, tau, strict))
        if not grown:
            break
        found.extend(grown)
        pre = grown
    return found


def _select_dfs(weights, start: int, s: float, tau: float, strict: bool) -> list[tuple[int, ...]]:
    if _meets(s, tau, strict):
        return [()]
    if not _meets(_upper(weights, start, s), tau, strict):
        return []
    return [(p,) + ext for p, w in enumerate(weights[start])
            for ext in _select_dfs(weights, start + 1, s + w, tau, strict)]


def select_weights(buckets: WeightBuckets, tau: float, strict: bool = False,
                   strategy: str = "swap") -> list[tuple[int, ...]]:
    """All minimal prefix rules whose canonical weight sum meets ``tau``.

    Meets means ``>= tau``, or ``> tau`` when ``strict``. Sums accumulate in
    feature order starting from 0. Rules are returned as schema value indices
    in lexicographic order. An empty result means no assignment meets the
    threshold; ``[()]`` means every assignment does.
    """
    if strategy == "swap":
        found = _select_swap(buckets.weights, 0, 0.0, tau, strict)
    elif strategy == "dfs":
        found = _select_dfs(buckets.weights, 0, 0.0, tau, strict)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    rules = [tuple(buckets.values[i][p] for i, p in enumerate(r)) for r in found]
    return sorted(rules)


# ---------------------------------------------------------------------------
# vectorized region splitting


def _canonical_rows(W: np.ndarray, B: np.ndarray, schema: FeatureSchema):
    """Canonical weights, thresholds and per-feature maxima for many behaviors."""
    C = np.empty_like(W)
    maxes = np.empty((len(W), schema.m))
    bias = np.asarray(B, dtype=np.float64).copy()
    for i, (off, size) in enumerate(zip(schema.offsets, schema.sizes)):
        block = W[:, off:off + size]
        lowest = block.min(axis=1)
        C[:, off:off + size] = block - lowest[:, None]
        maxes[:, i] = C[:, off:off + size].max(axis=1)
        bias = bias + lowest
    return C, -bias, maxes


def _split(C, tau, maxes, schema: FeatureSchema, rows, lo, length):
    """Refine start regions until each leaf has a constant activation sign.

    Start region ``t`` is the prefix ``(lo[t], length[t])`` judged with
    behavior row ``rows[t]``. Returns ``(rows, lo, length, active)`` for the
    leaves, sorted by ``lo``. All partial sums are accumulated in feature order
    from 0, so a region reached from a longer start prefix is judged with the
    same arithmetic as when reached from the root.
    """
    m, strides, sizes, offsets = schema.m, schema.strides, schema.sizes, schema.offsets
    rows = np.asarray(rows, dtype=np.int64)
    lo = np.asarray(lo, dtype=np.int64)
    length = np.asarray(length, dtype=np.int64)
    S = np.zeros(len(rows))
    for i in range(m):
        sel = length > i
        if not sel.any():
            break
        v = (lo[sel] // strides[i + 1]) % sizes[i]
        S[sel] = S[sel] + C[rows[sel], offsets[i] + v]

    leaf_rows, leaf_lo, leaf_len, leaf_act = [], [], [], []
    carry = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
    for d in range(m + 1):
        at = length == d
        r = np.concatenate([rows[at], carry[0]])
        l = np.concatenate([lo[at], carry[1]])
        s = np.concatenate([S[at], carry[2]])
        if not len(r):
            carry = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))
            continue
        t = tau[r]
        pos = s >= t
        ub = s.copy()
        for j in range(d, m):
            ub = ub + maxes[r, j]
        neg = ~pos & (ub < t)
        done = pos | neg
        leaf_rows.append(r[done]); leaf_lo.append(l[done])
        leaf_len.append(np.full(int(done.sum()), d, dtype=np.int64)); leaf_act.append(pos[done])
        open_ = ~done
        if d == m:
            assert not open_.any()
            break
        size = sizes[d]
        r, l, s = r[open_], l[open_], s[open_]
        v = np.tile(np.arange(size), len(r))
        r = np.repeat(r, size)
        carry = (r, np.repeat(l, size) + v * strides[d + 1], np.repeat(s, size) + C[r, offsets[d] + v])
    rows_o = np.concatenate(leaf_rows)
    lo_o = np.concatenate(leaf_lo)
    order = np.argsort(lo_o, kind="stable")
    return rows_o[order], lo_o[order], np.concatenate(leaf_len)[order], np.concatenate(leaf_act)[order]


def lin_rule(behavior: Behavior, schema: FeatureSchema) -> RuleList:
    """Rule list of ``ReLU(w . x + b)`` for a first-layer neuron.

    Active regions carry the neuron's own linear function, inactive regions
    the zero behavior. Regions where the pre-activation is exactly 0 are
    active (both behaviors are 0 there).
    """
    W = np.asarray(behavior.weights, dtype=np.float64)[None, :]
    if W.shape[1] != schema.n:
        raise ValueError(f"behavior width {W.shape[1]} != schema width {schema.n}")
    B = np.asarray([behavior.bias])
    C, tau, maxes = _canonical_rows(W, B, schema)
    _, lo, length, act = _split(C, tau, maxes, schema, [0], [0], [0])
    return RuleList(schema, lo, length, source=np.where(act, 0, -1), weights=W, biases=B)


# ---------------------------------------------------------------------------
# conjunction of neuron rule lists


@dataclass(frozen=True)
class Partition:
    """Common refinement of several rule lists.

    ``index[j, r]`` is the entry of input list ``j`` containing region ``r``.
    """

    lo: np.ndarray
    length: np.ndarray
    index: np.ndarray


def merge_partitions(lists: Sequence[RuleList]) -> Partition:
    """Conjoin ``p`` sorted rule lists by pairwise two-pointer merges, tournament style."""
    if not lists:
        raise ValueError("need at least one rule list")
    for rl in lists:
        rl.check_partition()
    strides = lists[0].schema.strides
    level = [(rl.lo, rl.length, {j: np.arange(len(rl))}) for j, rl in enumerate(lists)]
    while len(level) > 1:
        nxt = []
        for a, b in zip(level[::2], level[1::2]):
            lo, length, ia, ib = conjoin_sorted(a[0], a[1], b[0], b[1], strides)
            idx = {j: v[ia] for j, v in a[2].items()}
            idx.update({j: v[ib] for j, v in b[2].items()})
            nxt.append((lo, length, idx))
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    lo, length, idx = level[0]
    return Partition(lo, length, np.stack([idx[j] for j in range(len(lists))]))


def combine_behaviors(part: Partition, lists: Sequence[RuleList], coef: Sequence[float],
                      bias: float) -> tuple[np.ndarray, np.ndarray]:
    """``sum_j coef[j] * behavior_j + bias`` on every merged region."""
    n = lists[0].schema.n
    W = np.zeros((len(part.lo), n))
    B = np.zeros(len(part.lo))
    for j, (rl, c) in enumerate(zip(lists, coef)):
        src = rl.source[part.index[j]]
        act = src >= 0
        if c == 0.0 or not act.any():
            continue
        W[act] += c * rl.weights[src[act]]
        B[act] += c * rl.biases[src[act]]
    return W, B + bias


def merge_rule_lists(lists: Sequence[RuleList], coef: Sequence[float], bias: float = 0.0) -> RuleList:
    """Conjoin rule lists and linearly combine their behaviors."""
    if len(coef) != len(lists):
        raise ValueError("one combine weight per list")
    part = merge_partitions(lists)
    W, B = combine_behaviors(part, lists, coef, bias)
    return RuleList(lists[0].schema, part.lo, part.length, source=np.arange(len(W)), weights=W, biases=B)


def _split_regions(schema: FeatureSchema, part: Partition, W: np.ndarray, B: np.ndarray) -> RuleList:
    C, tau, maxes = _canonical_rows(W, B, schema)
    rows, lo, length, act = _split(C, tau, maxes, schema, np.arange(len(W)), part.lo, part.length)
    return RuleList(schema, lo, length, source=np.where(act, rows, -1), weights=W, biases=B)


def _split_regions_literal(schema: FeatureSchema, part: Partition, W: np.ndarray, B: np.ndarray) -> RuleList:
    # per precondition: rule list of the combined behavior over the whole
    # space, then AND each of its rules with the precondition
    entries = []
    for r in range(len(W)):
        pre = RuleList(schema, part.lo[r:r + 1], part.length[r:r + 1], labels=[0]).rule(0)
        sub = lin_rule(Behavior(W[r], B[r]), schema)
        for k in range(len(sub)):
            rule = conjoin(pre, sub.rule(k))
            if rule is not None:
                entries.append((rule, r if sub.source[k] >= 0 else -1))
    entries.sort(key=lambda e: e[0])
    lo = [rule_code(rule, schema) for rule, _ in entries]
    return RuleList(schema, lo, [len(rule) for rule, _ in entries],
                    source=np.asarray([s for _, s in entries], dtype=np.int64), weights=W, biases=B)


def neuron_rule(weights: Sequence[float], bias: float, inputs: Sequence[RuleList], *,
                literal: bool = False, partition: Partition | None = None) -> RuleList:
    """Rule list of a ReLU neuron fed by neurons with known rule lists.

    ``literal`` runs the per-precondition search over the whole space and
    conjoins afterwards instead of starting the search at the precondition;
    both give the same list. ``partition`` reuses a merge of ``inputs``.
    """
    if len(weights) != len(inputs):
        raise ValueError(f"{len(weights)} weights for {len(inputs)} input neurons")
    part = partition if partition is not None else merge_partitions(inputs)
    W, B = combine_behaviors(part, inputs, [float(w) for w in weights], float(bias))
    split = _split_regions_literal if literal else _split_regions
    return split(inputs[0].schema, part, W, B)


# ---------------------------------------------------------------------------
# driver


@dataclass
class Extraction:
    hidden: list[list[RuleList]]  # per hidden layer, one rule list per neuron
    output_raw: RuleList  # output neuron as a behavior list
    rules: RuleList  # class list: 1 where y^L >= 0


def extract_all(net: Network, schema: FeatureSchema, *, literal: bool = False,
                per_neuron_merge: bool = False) -> Extraction:
    net.check_schema(schema)
    first = net.layers[0]
    current = [lin_rule(Behavior(first.weights[i], first.biases[i]), schema) for i in range(first.width)]
    hidden = [current]
    log.debug("layer 1: rule list sizes %s", [len(r) for r in current])
    out = None
    for k, layer in enumerate(net.layers[1:], 2):
        shared = None if per_neuron_merge else merge_partitions(current)
        nxt = [neuron_rule(layer.weights[i], layer.biases[i], current, literal=literal, partition=shared)
               for i in range(layer.width)]
        log.debug("layer %d: merged %s regions, rule list sizes %s", k,
                  None if shared is None else len(shared.lo), [len(r) for r in nxt])
        if k == len(net.layers):
            out = nxt[0]
        else:
            hidden.append(nxt)
            current = nxt
    if out is None:
        # no hidden layer: the output neuron reads the input directly
        hidden = []
        out = lin_rule(Behavior(first.weights[0], first.biases[0]), schema)
    labels = (out.source >= 0).astype(np.int64)
    return Extraction(hidden, out, RuleList(schema, out.lo, out.length, labels=labels))


def extract(net: Network, schema: FeatureSchema, **kw) -> RuleList:
    """Class rule list equivalent to ``predict(net, .)`` on every instance."""
    return extract_all(net, schema, **kw).rules
