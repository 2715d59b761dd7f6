"""Categorical decision trees: a ground-truth baseline and a network-relabelled surrogate."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Network, predict_batch
from .schema import Dataset, FeatureSchema


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int | None = 8  # None: unbounded
    min_leaf: int = 5

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")


@dataclass
class TreeNode:
    """Leaf when ``feature`` is None; otherwise one child per value of ``feature``."""

    label: int
    counts: tuple[int, int]
    feature: int | None = None
    children: list["TreeNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def predict(self, instance) -> int:
        node = self
        while not node.is_leaf:
            node = node.children[instance[node.feature]]
        return node.label

    def predict_many(self, instances) -> np.ndarray:
        X = np.asarray(instances, dtype=np.int64)
        out = np.empty(len(X), dtype=np.int64)
        stack = [(self, np.arange(len(X)))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                out[idx] = node.label
                continue
            col = X[idx, node.feature]
            for v, child in enumerate(node.children):
                sel = idx[col == v]
                if len(sel):
                    stack.append((child, sel))
        return out

    def leaves(self):
        if self.is_leaf:
            yield self
        else:
            for c in self.children:
                yield from c.leaves()

    def num_leaves(self) -> int:
        return sum(1 for _ in self.leaves())

    def num_positive_leaves(self) -> int:
        return sum(leaf.label == 1 for leaf in self.leaves())

    def depth(self) -> int:
        return 0 if self.is_leaf else 1 + max(c.depth() for c in self.children)

    def to_text(self, schema: FeatureSchema | None = None, indent: str = "  ") -> str:
        lines: list[str] = []

        def walk(node, depth):
            pad = indent * depth
            if node.is_leaf:
                lines.append(f"{pad}-> {node.label} (neg={node.counts[0]}, pos={node.counts[1]})")
                return
            f = node.feature
            for v, child in enumerate(node.children):
                if schema is None:
                    lines.append(f"{pad}x{f} = {v}")
                else:
                    lines.append(f"{pad}{schema.features[f].name} = {schema.features[f].values[v]}")
                walk(child, depth + 1)

        walk(self, 0)
        return "\n".join(lines) + "\n"


def tree_predict(tree: TreeNode, instance) -> int:
    return tree.predict(instance)


def _gini(counts: np.ndarray) -> np.ndarray:
    """Gini impurity of each row of ``counts`` (k, 2); empty rows give 0."""
    tot = counts.sum(axis=-1)
    safe = np.maximum(tot, 1)
    p = counts / safe[..., None]
    return 1.0 - (p ** 2).sum(axis=-1)


def _majority(counts) -> int:
    return int(counts[1] > counts[0])  # ties go to 0


def train_tree(instances, labels, sizes, config: TreeConfig = TreeConfig()) -> TreeNode:
    """Greedy multiway Gini tree over categorical value indices.

    A feature is split at most once per path. A split needs at least two
    non-empty children, each holding ``min_leaf`` rows or more; among
    admissible splits the lowest weighted impurity wins (lowest feature
    index on ties). Values absent at a node get a leaf with the node's
    majority class.
    """
    X = np.asarray(instances, dtype=np.int64)
    y = np.asarray(labels, dtype=np.int64)
    sizes = list(sizes)
    if X.ndim != 2 or X.shape[1] != len(sizes):
        raise ValueError("instances must be (N, m) with m = len(sizes)")
    if len(X) != len(y):
        raise ValueError("instances and labels differ in length")
    if len(X) and not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0/1")

    def build(idx, used, depth, fallback):
        counts = np.bincount(y[idx], minlength=2) if len(idx) else np.zeros(2, np.int64)
        label = _majority(counts) if len(idx) else fallback
        node = TreeNode(label, (int(counts[0]), int(counts[1])))
        if counts.min() == 0 or (config.max_depth is not None and depth >= config.max_depth):
            return node
        best = None
        for f, k in enumerate(sizes):
            if f in used:
                continue
            table = np.zeros((k, 2), dtype=np.int64)
            np.add.at(table, (X[idx, f], y[idx]), 1)
            tot = table.sum(axis=1)
            nonempty = tot[tot > 0]
            if len(nonempty) < 2 or nonempty.min() < config.min_leaf:
                continue
            score = float((tot * _gini(table)).sum()) / len(idx)
            if best is None or score < best[0] - 1e-12:
                best = (score, f)
        if best is None:
            return node
        f = best[1]
        node.feature = f
        col = X[idx, f]
        node.children = [build(idx[col == v], used | {f}, depth + 1, label) for v in range(sizes[f])]
        return node

    return build(np.arange(len(X)), frozenset(), 0, 0)


def train_tree_on(data: Dataset, config: TreeConfig = TreeConfig()) -> TreeNode:
    return train_tree(data.X, data.y, data.schema.sizes, config)


def trepan_lite(net: Network, train: Dataset, config: TreeConfig = TreeConfig()) -> TreeNode:
    """Tree fit to the network's predicted labels on the training instances."""
    return train_tree(train.X, predict_batch(net, train.one_hot()), train.schema.sizes, config)
