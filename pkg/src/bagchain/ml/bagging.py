"""The four bagging operations: Resample, Train (see tree), Aggregate, Metric."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from ..metrics import MetricValue
from .dataset import Dataset


def resample(data: Dataset, seed: int) -> Dataset:
    """Bootstrap: n uniform draws with replacement, deterministic under seed."""
    if len(data) == 0:
        raise ValueError("cannot resample an empty dataset")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(data), size=len(data))
    return data.subset(idx)


def aggregate(predictions: Sequence[np.ndarray]) -> np.ndarray:
    """Per-sample plurality vote over models' predicted labels; ties go to
    the smallest class index."""
    if len(predictions) == 0:
        raise ValueError("aggregate needs at least one model's predictions")
    stacked = np.stack([np.asarray(p, dtype=np.int64) for p in predictions])
    n_classes = int(stacked.max()) + 1
    votes = np.zeros((stacked.shape[1], n_classes), dtype=np.int64)
    sample_idx = np.arange(stacked.shape[1])
    for row in stacked:
        votes[sample_idx, row] += 1
    return np.argmax(votes, axis=1)  # argmax takes the smallest index on ties


def metric(pred: np.ndarray, truth: np.ndarray) -> MetricValue:
    """Classification accuracy as an exact (correct, total) pair."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.size == 0:
        raise ValueError("prediction and truth vectors must be equal-length and non-empty")
    return MetricValue(int((pred == truth).sum()), int(pred.size))
