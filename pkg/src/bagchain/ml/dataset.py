"""Datasets: synthetic blob generation, CSV loading, commitments, splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..hashing import HashDigest, encode_fields, sha256, u64


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus class-label vector."""

    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    n_classes: int
    role: str = "unspecified"

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("features must be 2-D and labels 1-D")
        if len(self.features) != len(self.labels):
            raise ValueError("feature rows and labels must align")
        if len(self.labels) and int(self.labels.max()) >= self.n_classes:
            raise ValueError("label exceeds n_classes")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray, role: str | None = None) -> "Dataset":
        return Dataset(
            self.features[indices], self.labels[indices], self.n_classes, role or self.role
        )

    def union(self, other: "Dataset", role: str | None = None) -> "Dataset":
        if self.n_classes != other.n_classes:
            raise ValueError("class counts differ")
        return Dataset(
            np.concatenate([self.features, other.features]),
            np.concatenate([self.labels, other.labels]),
            self.n_classes,
            role or self.role,
        )

    def canonical_bytes(self) -> bytes:
        return encode_fields(
            u64(len(self)),
            u64(self.n_features),
            u64(self.n_classes),
            np.ascontiguousarray(self.features, dtype=">f8").tobytes(),
            np.ascontiguousarray(self.labels, dtype=">i8").tobytes(),
        )

    @cached_property
    def commitment(self) -> HashDigest:
        return sha256(self.canonical_bytes())

    def commit(self) -> HashDigest:
        return self.commitment


def synthesize_dataset(
    n: int, d: int, n_classes: int, separation: float, seed: int, role: str = "unspecified"
) -> Dataset:
    """Seeded Gaussian-blob mixture with one component per class and
    balanced labels."""
    if n_classes < 2 or n < n_classes or d < 1:
        raise ValueError(f"invalid dimensions n={n} d={d} classes={n_classes}")
    rng = np.random.default_rng(seed)
    means = separation * rng.standard_normal((n_classes, d))
    per_class = [n // n_classes] * n_classes
    for k in range(n % n_classes):
        per_class[k] += 1
    labels = np.repeat(np.arange(n_classes, dtype=np.int64), per_class)
    features = means[labels] + rng.standard_normal((n, d))
    return Dataset(features, labels, n_classes, role)


def load_csv(path: str, role: str = "unspecified") -> Dataset:
    """Load a dataset from CSV with header ``f0,…,f{d-1},label``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[-1] != "label":
            raise ValueError("last CSV column must be 'label'")
        rows = [row for row in reader if row]
    features = np.array([[float(v) for v in row[:-1]] for row in rows], dtype=np.float64)
    labels = np.array([int(row[-1]) for row in rows], dtype=np.int64)
    if labels.size and labels.min() < 0:
        raise ValueError("labels must be non-negative integers")
    n_classes = int(labels.max()) + 1 if labels.size else 2
    return Dataset(features, labels, n_classes, role)


def split_val_test(holdout: Dataset, seed: int) -> tuple[Dataset, Dataset]:
    """Disjoint halves of the held-out set; validation gets floor(n/2)."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(holdout))
    n_val = len(holdout) // 2
    val = holdout.subset(order[:n_val], role="validation")
    test = holdout.subset(order[n_val:], role="test")
    return val, test
