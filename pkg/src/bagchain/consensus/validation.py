"""Block validation with machine-readable reason codes.

Validators recompute every asserted metric from fetched model parameters
and the published datasets; a metric check demands exact equality of the
(correct, total) pairs. Blocks whose referenced objects are not yet
fetchable come back PENDING rather than invalid.
"""

from __future__ import annotations

import enum
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ..chain import EnsembleBlock, KeyBlock, MiniBlock, PayloadRecord, Task, payload_merkle_root
from ..hashing import HashDigest, sha256
from ..metrics import ZERO_METRIC, MetricValue
from ..ml.bagging import aggregate, metric
from ..ml.dataset import Dataset
from ..ml.tree import DecisionTree, model_hash
from .rewards import build_payload


class Status(enum.Enum):
    VALID = "valid"
    INVALID = "invalid"
    PENDING = "pending"


class Reason(enum.Enum):
    OWNERSHIP_MISMATCH = "ownership-mismatch"
    UNDERPERFORMANCE = "underperformance"
    STALE_PREHASH = "stale-prehash"
    WRONG_HEIGHT_OR_TASK = "wrong-height-or-task"
    DUPLICATE_MODEL = "duplicate-model"
    METRIC_MISMATCH = "metric-mismatch"
    BELOW_FLOOR = "below-floor"
    EMPTY_ENSEMBLE = "empty-ensemble"
    POW_FAIL = "pow-fail"
    ENTRY_ORDER = "entry-order"
    METRIC_BEST_INCONSISTENT = "metric-best-inconsistent"
    PREHASH_VOTE = "prehash-vote"
    PAYLOAD_INVALID = "payload-invalid"
    TASK_QUEUE_INVALID = "task-queue-invalid"
    MISSING_PARENT = "missing-parent"


@dataclass(frozen=True)
class ValidationResult:
    status: Status
    reason: Reason | None = None

    @property
    def ok(self) -> bool:
        return self.status is Status.VALID

    @property
    def pending(self) -> bool:
        return self.status is Status.PENDING


VALID = ValidationResult(Status.VALID)
PENDING = ValidationResult(Status.PENDING)


def invalid(reason: Reason) -> ValidationResult:
    return ValidationResult(Status.INVALID, reason)


class EvalCache:
    """Memo for deserialized trees and per-dataset predictions.

    Predictions are a pure function of (parameters, dataset), so the cache
    may be shared between miners without affecting outcomes.
    """

    def __init__(self) -> None:
        self._trees: dict[bytes, DecisionTree] = {}
        self._preds: dict[tuple[bytes, bytes], np.ndarray] = {}

    def tree(self, params: bytes) -> DecisionTree:
        key = sha256(params).value
        tree = self._trees.get(key)
        if tree is None:
            tree = DecisionTree.deserialize(params)
            self._trees[key] = tree
        return tree

    def predict(self, params: bytes, dataset: Dataset) -> np.ndarray:
        key = (sha256(params).value, dataset.commitment.value)
        preds = self._preds.get(key)
        if preds is None:
            preds = self.tree(params).predict(dataset.features)
            self._preds[key] = preds
        return preds


ParamsResolver = Callable[[HashDigest], bytes | None]
MiniBlockResolver = Callable[[HashDigest], MiniBlock | None]
EnsembleResolver = Callable[[HashDigest], EnsembleBlock | None]


def validate_miniblock(
    mb: MiniBlock,
    params: bytes | None,
    task: Task,
    d_v: Dataset,
    cache: EvalCache,
) -> ValidationResult:
    """Ownership binding plus the validation-set performance floor."""
    if params is None:
        return PENDING
    if model_hash(params, mb.miner_id) != mb.model_hash:
        return invalid(Reason.OWNERSHIP_MISMATCH)
    if mb.task_id != task.task_id:
        return invalid(Reason.WRONG_HEIGHT_OR_TASK)
    score = metric(cache.predict(params, d_v), d_v.labels)
    if not score.exceeds(task.metric_min):
        return invalid(Reason.UNDERPERFORMANCE)
    return VALID


def _resolve_ensemble_models(
    eb: EnsembleBlock,
    task: Task,
    d_v: Dataset,
    parent_digest: HashDigest,
    cfs_enabled: bool,
    resolve_mb: MiniBlockResolver,
    resolve_params: ParamsResolver,
    cache: EvalCache,
) -> tuple[ValidationResult | None, list[bytes]]:
    """Shared MiniBlock-level checks; returns (failure-or-None, params list)."""
    if not eb.miniblock_hashes:
        return invalid(Reason.EMPTY_ENSEMBLE), []
    if len(set(eb.miniblock_hashes)) != len(eb.miniblock_hashes):
        return invalid(Reason.DUPLICATE_MODEL), []
    all_params: list[bytes] = []
    seen_models: set[bytes] = set()
    for mb_hash in eb.miniblock_hashes:
        mb = resolve_mb(mb_hash)
        if mb is None:
            return PENDING, []
        params = resolve_params(mb.model_hash)
        result = validate_miniblock(mb, params, task, d_v, cache)
        if not result.ok:
            return result, []
        if cfs_enabled:
            if mb.height != eb.height or mb.task_id != eb.task_id:
                return invalid(Reason.WRONG_HEIGHT_OR_TASK), []
            raw_hash = sha256(params).value
            if raw_hash in seen_models:
                return invalid(Reason.DUPLICATE_MODEL), []
            seen_models.add(raw_hash)
        elif mb.prehash != parent_digest:
            return invalid(Reason.STALE_PREHASH), []
        all_params.append(params)
    return None, all_params


def ensemble_metric(params_list: list[bytes], dataset: Dataset, cache: EvalCache) -> MetricValue:
    preds = [cache.predict(p, dataset) for p in params_list]
    return metric(aggregate(preds), dataset.labels)


def validate_ensembleblock(
    eb: EnsembleBlock,
    task: Task,
    d_v: Dataset,
    parent_digest: HashDigest,
    cfs_enabled: bool,
    resolve_mb: MiniBlockResolver,
    resolve_params: ParamsResolver,
    cache: EvalCache,
) -> ValidationResult:
    """Recursive MiniBlock checks, the prehash rule, and an exact
    recomputation of the asserted validation metric."""
    failure, params_list = _resolve_ensemble_models(
        eb, task, d_v, parent_digest, cfs_enabled, resolve_mb, resolve_params, cache
    )
    if failure is not None:
        return failure
    recomputed = ensemble_metric(params_list, d_v, cache)
    if recomputed != eb.metric_v:
        return invalid(Reason.METRIC_MISMATCH)
    if not eb.metric_v.exceeds(task.metric_min):
        return invalid(Reason.BELOW_FLOOR)
    return VALID


def prehash_majority(miniblocks: list[MiniBlock]) -> HashDigest:
    """Plurality parent among MiniBlock votes; ties to the smaller digest."""
    votes: dict[HashDigest, int] = {}
    for mb in miniblocks:
        votes[mb.prehash] = votes.get(mb.prehash, 0) + 1
    return min(votes, key=lambda d: (-votes[d], d.value))


def validate_keyblock(
    kb: KeyBlock,
    task: Task,
    d_v: Dataset,
    d_e: Dataset,
    parent: KeyBlock | None,
    target: int,
    cfs_enabled: bool,
    block_reward: int,
    resolve_eb: EnsembleResolver,
    resolve_mb: MiniBlockResolver,
    resolve_params: ParamsResolver,
    cache: EvalCache,
) -> ValidationResult:
    if parent is None:
        return ValidationResult(Status.PENDING, Reason.MISSING_PARENT)
    if kb.digest.as_int() >= target:
        return invalid(Reason.POW_FAIL)
    # task queue: completed head popped, one task appended, length preserved
    if (
        kb.task_id != parent.task_queue[0]
        or len(kb.task_queue) != len(parent.task_queue)
        or kb.task_queue[:-1] != parent.task_queue[1:]
    ):
        return invalid(Reason.TASK_QUEUE_INVALID)
    metrics = [m for _, m in kb.eb_entries]
    if any(metrics[i] < metrics[i + 1] for i in range(len(metrics) - 1)):
        return invalid(Reason.ENTRY_ORDER)
    if kb.eb_entries:
        if kb.metric_best != metrics[0] or any(m > kb.metric_best for m in metrics):
            return invalid(Reason.METRIC_BEST_INCONSISTENT)
    elif kb.metric_best != ZERO_METRIC:
        return invalid(Reason.METRIC_BEST_INCONSISTENT)

    winner_producers: list[str] = []
    for rank, (eb_hash, metric_e) in enumerate(kb.eb_entries):
        eb = resolve_eb(eb_hash)
        if eb is None:
            return PENDING
        result = validate_ensembleblock(
            eb, task, d_v, kb.prehash, cfs_enabled, resolve_mb, resolve_params, cache
        )
        if not result.ok:
            return result
        params_list = [resolve_params(resolve_mb(h).model_hash) for h in eb.miniblock_hashes]
        if ensemble_metric(params_list, d_e, cache) != metric_e:
            return invalid(Reason.METRIC_MISMATCH)
        if rank == 0:
            miniblocks = [resolve_mb(h) for h in eb.miniblock_hashes]
            winner_producers = [mb.miner_id for mb in miniblocks]
            if cfs_enabled and prehash_majority(miniblocks) != kb.prehash:
                return invalid(Reason.PREHASH_VOTE)

    expected = build_payload(winner_producers, task.fee, kb.miner_id, block_reward)
    if kb.payload != expected or kb.merkle_root != payload_merkle_root(expected):
        return invalid(Reason.PAYLOAD_INVALID)
    return VALID
