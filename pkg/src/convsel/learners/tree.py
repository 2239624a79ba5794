"""CART decision tree with Gini splitting."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import EmptyDataset, EmptyNode
from ..shapes import ConvMethod

N_CLASSES = len(ConvMethod)
LEAF = -1
_TIE_EPS = 1e-9


def gini_index(class_counts) -> float:
    """Gini impurity ``1 - sum_c p_c^2`` of a node with the given class counts."""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total < 1:
        raise EmptyNode("gini index of an empty node")
    p = counts / total
    return float(1.0 - np.dot(p, p))


def _majority(counts) -> int:
    # np.argmax returns the first maximum, i.e. the lowest class code
    return int(np.argmax(counts))


@dataclass(frozen=True)
class Node:
    """One tree node. Leaves have ``feature == -1``.

    Every node keeps the class counts of the training samples that reached
    it, so any internal node can be collapsed into a leaf when pruning.
    """

    feature: int
    threshold: float
    left: int
    right: int
    label: int
    counts: tuple[int, ...]

    @property
    def is_leaf(self) -> bool:
        return self.feature == LEAF


@dataclass
class DecisionTreeModel:
    nodes: list[Node]
    max_depth: int | None = 12
    min_samples_split: int = 2
    n_features: int = 5

    kind = "dt"

    def predict(self, features) -> ConvMethod:
        return predict_dt(self, features)

    def predict_many(self, X) -> np.ndarray:
        return np.array([predict_dt(self, row) for row in np.asarray(X)], dtype=np.int64)

    @property
    def depth(self) -> int:
        def walk(i):
            node = self.nodes[i]
            if node.is_leaf:
                return 0
            return 1 + max(walk(node.left), walk(node.right))

        return walk(0)

    @property
    def n_leaves(self) -> int:
        return sum(n.is_leaf for n in self.nodes)

    def validate(self):
        """Check that every node is reached exactly once from the root and
        that leaf labels agree with their counts."""
        seen = set()
        stack = [0]
        while stack:
            i = stack.pop()
            if i in seen or not 0 <= i < len(self.nodes):
                raise ValueError(f"tree is not a well-formed tree at node {i}")
            seen.add(i)
            node = self.nodes[i]
            if node.is_leaf:
                if node.label != _majority(node.counts):
                    raise ValueError(f"leaf {i} label disagrees with its class counts")
            else:
                if not 0 <= node.feature < self.n_features:
                    raise ValueError(f"node {i} tests unknown feature {node.feature}")
                stack.extend((node.right, node.left))
        if len(seen) != len(self.nodes):
            raise ValueError("tree has unreachable nodes")


def _best_split(X, y, idx):
    """Return (score, feature, threshold) minimising weighted child impurity.

    The score is ``sum_child (n_child - sum_c n_{child,c}^2 / n_child)``, i.e.
    the count-weighted Gini. Ties go to the lowest feature, then the lowest
    threshold. Returns None when every feature is constant on ``idx``.
    """
    best = None
    yi = y[idx]
    n = len(idx)
    for f in range(X.shape[1]):
        col = X[idx, f]
        order = np.argsort(col, kind="stable")
        values = col[order]
        onehot = np.zeros((n, N_CLASSES), dtype=np.int64)
        onehot[np.arange(n), yi[order]] = 1
        left = np.cumsum(onehot, axis=0)[:-1]
        # split after position p only where the next value differs
        boundaries = np.nonzero(values[1:] != values[:-1])[0]
        if boundaries.size == 0:
            continue
        left = left[boundaries]
        right = onehot.sum(axis=0) - left
        n_left = (boundaries + 1).astype(np.float64)
        n_right = n - n_left
        score = (
            n_left - (left.astype(np.float64) ** 2).sum(axis=1) / n_left
            + n_right - (right.astype(np.float64) ** 2).sum(axis=1) / n_right
        )
        # exact ties can differ in the last bit, so compare with a tolerance
        low = float(score.min())
        p = int(np.argmax(score <= low + _TIE_EPS))
        if best is None or score[p] < best[0] - _TIE_EPS:
            b = boundaries[p]
            threshold = (float(values[b]) + float(values[b + 1])) / 2.0
            best = (float(score[p]), f, threshold)
    return best


def train_decision_tree(X, y, max_depth: int | None = 12, min_samples_split: int = 2):
    """Grow a tree greedily, splitting each node on the (feature, threshold)
    pair with the lowest count-weighted child Gini.

    Candidate thresholds are midpoints between consecutive distinct values.
    A node becomes a leaf when it is pure, reaches ``max_depth`` (None for
    unlimited), holds fewer than ``min_samples_split`` samples, or has no
    feature with two distinct values. Samples with ``x < threshold`` go left.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyDataset("cannot train a tree on an empty dataset")
    if len(y) != len(X):
        raise ValueError("features and labels differ in length")

    nodes: list[Node | None] = []

    def grow(idx, depth):
        counts = tuple(int(c) for c in np.bincount(y[idx], minlength=N_CLASSES))
        slot = len(nodes)
        nodes.append(None)
        split = None
        pure = max(counts) == len(idx)
        depth_ok = max_depth is None or depth < max_depth
        if not pure and depth_ok and len(idx) >= min_samples_split:
            split = _best_split(X, y, idx)
        if split is None:
            nodes[slot] = Node(LEAF, 0.0, LEAF, LEAF, _majority(counts), counts)
            return slot
        _, f, threshold = split
        mask = X[idx, f] < threshold
        left = grow(idx[mask], depth + 1)
        right = grow(idx[~mask], depth + 1)
        nodes[slot] = Node(f, threshold, left, right, _majority(counts), counts)
        return slot

    grow(np.arange(len(X)), 0)
    return DecisionTreeModel(list(nodes), max_depth, min_samples_split, X.shape[1])


def predict_dt(model: DecisionTreeModel, features) -> ConvMethod:
    nodes = model.nodes
    node = nodes[0]
    while not node.is_leaf:
        node = nodes[node.left] if features[node.feature] < node.threshold else nodes[node.right]
    return ConvMethod(node.label)


def prune_reduced_error(model: DecisionTreeModel, X_val, y_val) -> DecisionTreeModel:
    """Reduced-error pruning against a validation set.

    Working bottom-up, an internal node is replaced by a leaf predicting its
    training majority whenever that does not lower validation accuracy on
    the samples reaching it. Returns a new, compacted model.
    """
    X_val = np.asarray(X_val, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.int64)
    nodes = list(model.nodes)

    def reach(i, idx):
        # correct predictions of the current subtree on samples idx
        node = nodes[i]
        if node.is_leaf:
            return int(np.sum(y_val[idx] == node.label))
        mask = X_val[idx, node.feature] < node.threshold
        return reach(node.left, idx[mask]) + reach(node.right, idx[~mask])

    def visit(i, idx):
        node = nodes[i]
        if node.is_leaf:
            return
        mask = X_val[idx, node.feature] < node.threshold
        visit(node.left, idx[mask])
        visit(node.right, idx[~mask])
        as_leaf = int(np.sum(y_val[idx] == node.label))
        if as_leaf >= reach(i, idx):
            nodes[i] = replace(node, feature=LEAF, threshold=0.0, left=LEAF, right=LEAF)

    visit(0, np.arange(len(X_val)))

    compact: list[Node] = []

    def copy(i):
        node = nodes[i]
        slot = len(compact)
        compact.append(node)
        if not node.is_leaf:
            left = copy(node.left)
            right = copy(node.right)
            compact[slot] = replace(node, left=left, right=right)
        return slot

    copy(0)
    return DecisionTreeModel(compact, model.max_depth, model.min_samples_split, model.n_features)
