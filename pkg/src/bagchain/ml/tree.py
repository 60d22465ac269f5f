"""Reference CART decision-tree learner.

Greedy Gini-impurity splits with deterministic tie-breaking (smallest
feature index, then smallest threshold). Trees serialize to a canonical
pre-order node array used both for hashing and for model transfers, and
leaves store exact class counts so predictions are integer arithmetic.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..hashing import HashDigest, canonical_hash, encode_fields, f64, u64, utf8
from ..chain import LearnerSpec
from .dataset import Dataset

_LEAF, _SPLIT = 0, 1


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    counts: np.ndarray | None = None  # leaf-only class counts

    @property
    def is_leaf(self) -> bool:
        return self.counts is not None


class DecisionTree:
    """A fitted depth-limited binary classification tree."""

    def __init__(self, root: _Node, n_classes: int):
        self.root = root
        self.n_classes = n_classes

    def predict(self, features: np.ndarray) -> np.ndarray:
        labels = np.empty(len(features), dtype=np.int64)
        stack = [(self.root, np.arange(len(features)))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if node.is_leaf:
                labels[idx] = int(np.argmax(node.counts))
                continue
            go_left = features[idx, node.feature] <= node.threshold
            stack.append((node.left, idx[go_left]))
            stack.append((node.right, idx[~go_left]))
        return labels

    def serialize(self) -> bytes:
        chunks = [u64(self.n_classes)]

        def walk(node: _Node) -> None:
            if node.is_leaf:
                chunks.append(bytes([_LEAF]))
                chunks.extend(u64(int(c)) for c in node.counts)
            else:
                chunks.append(bytes([_SPLIT]))
                chunks.append(u64(node.feature))
                chunks.append(f64(node.threshold))
                walk(node.left)
                walk(node.right)

        walk(self.root)
        return b"".join(chunks)

    @classmethod
    def deserialize(cls, data: bytes) -> "DecisionTree":
        n_classes = int.from_bytes(data[:8], "big")
        pos = 8

        def read() -> _Node:
            nonlocal pos
            tag = data[pos]
            pos += 1
            if tag == _LEAF:
                counts = np.frombuffer(data[pos : pos + 8 * n_classes], dtype=">u8").astype(
                    np.int64
                )
                pos += 8 * n_classes
                return _Node(counts=counts)
            feature = int.from_bytes(data[pos : pos + 8], "big")
            pos += 8
            (threshold,) = struct.unpack(">d", data[pos : pos + 8])
            pos += 8
            left = read()
            right = read()
            return _Node(feature=feature, threshold=threshold, left=left, right=right)

        root = read()
        if pos != len(data):
            raise ValueError("trailing bytes in serialized tree")
        return cls(root, n_classes)


def _best_split(X: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int):
    """Return (weighted_sq_sum, feature, threshold) of the best split, or
    None when no split satisfies the leaf-size constraint.

    Maximizing sum(counts_l^2)/n_l + sum(counts_r^2)/n_r minimizes the
    weighted Gini impurity.
    """
    n = len(y)
    best = None
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    for feat in range(X.shape[1]):
        col = X[:, feat]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        onehot[:] = 0.0
        onehot[np.arange(n), y[order]] = 1.0
        left_counts = np.cumsum(onehot, axis=0)  # counts with first i+1 rows on the left
        total = left_counts[-1]
        # candidate cuts between distinct consecutive values
        cuts = np.flatnonzero(xs[:-1] < xs[1:])
        if min_leaf > 1:
            cuts = cuts[(cuts + 1 >= min_leaf) & (n - cuts - 1 >= min_leaf)]
        if cuts.size == 0:
            continue
        n_left = (cuts + 1).astype(np.float64)
        n_right = n - n_left
        lc = left_counts[cuts]
        rc = total - lc
        score = (lc * lc).sum(axis=1) / n_left + (rc * rc).sum(axis=1) / n_right
        i = int(np.argmax(score))  # first max: smallest threshold wins ties
        if best is None or score[i] > best[0]:
            threshold = (xs[cuts[i]] + xs[cuts[i] + 1]) / 2.0
            best = (float(score[i]), feat, float(threshold))
    return best


def train(data: Dataset, spec: LearnerSpec) -> DecisionTree:
    """Fit a greedy CART tree; deterministic given (data, spec)."""
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    if spec.max_depth < 1 or spec.min_leaf < 1:
        raise ValueError("max_depth and min_leaf must both be >= 1")
    X = np.asarray(data.features, dtype=np.float64)
    y = np.asarray(data.labels, dtype=np.int64)
    n_classes = data.n_classes

    def build(idx: np.ndarray, depth: int) -> _Node:
        counts = np.bincount(y[idx], minlength=n_classes).astype(np.int64)
        n = idx.size
        pure = int(counts.max()) == n
        if depth >= spec.max_depth or pure or n < 2 * spec.min_leaf:
            return _Node(counts=counts)
        parent_score = float((counts.astype(np.float64) ** 2).sum()) / n
        best = _best_split(X[idx], y[idx], n_classes, spec.min_leaf)
        if best is None or best[0] <= parent_score:
            return _Node(counts=counts)
        _, feature, threshold = best
        go_left = X[idx, feature] <= threshold
        return _Node(
            feature=feature,
            threshold=threshold,
            left=build(idx[go_left], depth + 1),
            right=build(idx[~go_left], depth + 1),
        )

    return DecisionTree(build(np.arange(len(y)), 0), n_classes)


def model_hash(params: bytes, owner: str) -> HashDigest:
    """ModelHash binding serialized parameters to their owner's ID."""
    return canonical_hash(encode_fields(params, utf8(owner)))


@dataclass(frozen=True)
class TrainedModel:
    """A base learner's serialized parameters bound to the owning miner."""

    params: bytes
    owner: str

    @cached_property
    def model_hash(self) -> HashDigest:
        return model_hash(self.params, self.owner)

    def tree(self) -> DecisionTree:
        return DecisionTree.deserialize(self.params)


def fit_model(data: Dataset, spec: LearnerSpec, owner: str) -> TrainedModel:
    return TrainedModel(train(data, spec).serialize(), owner)
