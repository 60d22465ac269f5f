"""Tasks, the three block layers, and the block store.

Key Blocks form the hash chain; MiniBlocks and Ensemble Blocks hang off
their parent Key Block and are indexed per height. All block types are
immutable values with a canonical byte encoding used both for hashing and
as the wire format.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from .hashing import (
    ZERO_DIGEST,
    HashDigest,
    canonical_hash,
    encode_fields,
    f64,
    merkle_root,
    tagged,
    u64,
    utf8,
)
from .metrics import ZERO_METRIC, MetricValue


class ProtocolError(Exception):
    """A consensus rule was violated by the local caller."""


@dataclass(frozen=True)
class LearnerSpec:
    family: str = "cart"
    max_depth: int = 8
    min_leaf: int = 5

    def canonical_bytes(self) -> bytes:
        return tagged("learner", utf8(self.family), u64(self.max_depth), u64(self.min_leaf))


@dataclass(frozen=True)
class Task:
    """A published ML job: dataset commitments, learner spec, floor, fee."""

    train_commit: HashDigest
    val_commit: HashDigest
    test_commit: HashDigest
    learner_spec: LearnerSpec
    aggregate_rule: str = "majority-vote"
    metric_rule: str = "accuracy"
    metric_min: float = 0.0
    fee: int = 0
    requester_id: str = "R0"

    def __post_init__(self) -> None:
        if not 0.0 <= self.metric_min <= 1.0:
            raise ValueError(f"metric_min out of range: {self.metric_min}")
        if self.fee < 0:
            raise ValueError("fee must be non-negative")
        commits = {self.train_commit, self.val_commit, self.test_commit}
        if len(commits) != 3:
            raise ValueError("dataset commitments must be pairwise distinct")

    def canonical_bytes(self) -> bytes:
        return tagged(
            "task",
            self.train_commit.value,
            self.val_commit.value,
            self.test_commit.value,
            self.learner_spec.canonical_bytes(),
            utf8(self.aggregate_rule),
            utf8(self.metric_rule),
            f64(self.metric_min),
            u64(self.fee),
            utf8(self.requester_id),
        )

    @cached_property
    def task_id(self) -> HashDigest:
        return canonical_hash(self)


@dataclass(frozen=True)
class MiniBlock:
    timestamp: int
    miner_id: str
    task_id: HashDigest
    model_hash: HashDigest
    prehash: HashDigest
    height: int

    def canonical_bytes(self) -> bytes:
        return tagged(
            "miniblock",
            u64(self.timestamp),
            utf8(self.miner_id),
            self.task_id.value,
            self.model_hash.value,
            self.prehash.value,
            u64(self.height),
        )

    @cached_property
    def digest(self) -> HashDigest:
        return canonical_hash(self)


@dataclass(frozen=True)
class EnsembleBlock:
    miniblock_hashes: tuple[HashDigest, ...]
    metric_v: MetricValue
    miner_id: str
    task_id: HashDigest
    timestamp: int
    height: int

    def canonical_bytes(self) -> bytes:
        return tagged(
            "ensembleblock",
            encode_fields(*(h.value for h in self.miniblock_hashes)),
            self.metric_v.canonical_bytes(),
            utf8(self.miner_id),
            self.task_id.value,
            u64(self.timestamp),
            u64(self.height),
        )

    @cached_property
    def digest(self) -> HashDigest:
        return canonical_hash(self)


@dataclass(frozen=True)
class PayloadRecord:
    kind: str  # "training-fee-share" | "keyblock-reward"
    payee: str
    amount: int

    def __post_init__(self) -> None:
        if self.kind not in ("training-fee-share", "keyblock-reward"):
            raise ValueError(f"unknown payload kind: {self.kind}")
        if self.amount < 0:
            raise ValueError("payload amounts must be non-negative")

    def canonical_bytes(self) -> bytes:
        return tagged("payload", utf8(self.kind), utf8(self.payee), u64(self.amount))


@dataclass(frozen=True)
class KeyBlock:
    nonce: int
    merkle_root: HashDigest
    timestamp: int
    metric_best: MetricValue
    eb_entries: tuple[tuple[HashDigest, MetricValue], ...]
    miner_id: str
    task_id: HashDigest
    task_queue: tuple[HashDigest, ...]
    prehash: HashDigest
    height: int
    # Payload records travel with the block but are bound through merkle_root,
    # so they are excluded from the canonical encoding.
    payload: tuple[PayloadRecord, ...] = ()

    def canonical_bytes(self) -> bytes:
        entries = encode_fields(
            *(encode_fields(h.value, m.canonical_bytes()) for h, m in self.eb_entries)
        )
        return tagged(
            "keyblock",
            u64(self.nonce),
            self.merkle_root.value,
            u64(self.timestamp),
            self.metric_best.canonical_bytes(),
            entries,
            utf8(self.miner_id),
            self.task_id.value,
            encode_fields(*(t.value for t in self.task_queue)),
            self.prehash.value,
            u64(self.height),
        )

    @cached_property
    def digest(self) -> HashDigest:
        return canonical_hash(self)

    @property
    def winning_entry(self) -> tuple[HashDigest, MetricValue] | None:
        return self.eb_entries[0] if self.eb_entries else None


def payload_merkle_root(records: tuple[PayloadRecord, ...]) -> HashDigest:
    return merkle_root([r.canonical_bytes() for r in records])


def push_task_queue(
    queue: tuple[HashDigest, ...], completed: HashDigest, incoming: HashDigest
) -> tuple[HashDigest, ...]:
    """Pop the completed head and append the incoming task; length-preserving."""
    if not queue or queue[0] != completed:
        raise ProtocolError("completed task does not match the queue head")
    return queue[1:] + (incoming,)


def make_genesis(initial_queue: tuple[HashDigest, ...]) -> KeyBlock:
    """Genesis Key Block: height 0, all-zeros prehash, seeded task queue."""
    return KeyBlock(
        nonce=0,
        merkle_root=payload_merkle_root(()),
        timestamp=0,
        metric_best=ZERO_METRIC,
        eb_entries=(),
        miner_id="genesis",
        task_id=ZERO_DIGEST,
        task_queue=tuple(initial_queue),
        prehash=ZERO_DIGEST,
        height=0,
    )


def chain_preference_key(kb: KeyBlock):
    """Sort key for fork choice: longest chain, then best metric, then
    smaller tip digest. Smaller key wins."""
    return (-kb.height, -kb.metric_best.as_fraction(), kb.digest.value)


class BlockStore:
    """One miner's replica of every block it has accepted.

    Non-genesis Key Blocks whose parent is unknown wait in the orphan
    buffer and are attached once the parent arrives.
    """

    def __init__(self, genesis: KeyBlock):
        self.genesis = genesis
        self.keyblocks: dict[HashDigest, KeyBlock] = {genesis.digest: genesis}
        self.children: dict[HashDigest, list[HashDigest]] = {}
        self.orphans: dict[HashDigest, list[KeyBlock]] = {}
        self.miniblocks: dict[HashDigest, MiniBlock] = {}
        self.ensembleblocks: dict[HashDigest, EnsembleBlock] = {}
        self.miniblocks_by_height: dict[int, list[HashDigest]] = {}
        self.ensembleblocks_by_height: dict[int, list[HashDigest]] = {}

    def has_keyblock(self, digest: HashDigest) -> bool:
        return digest in self.keyblocks

    def add_keyblock(self, kb: KeyBlock) -> bool:
        """Insert a Key Block; returns True if attached, False if orphaned
        or already known."""
        if kb.digest in self.keyblocks:
            return False
        if kb.prehash not in self.keyblocks:
            self.orphans.setdefault(kb.prehash, []).append(kb)
            return False
        parent = self.keyblocks[kb.prehash]
        if kb.height != parent.height + 1:
            raise ProtocolError(
                f"child height {kb.height} does not follow parent height {parent.height}"
            )
        self.keyblocks[kb.digest] = kb
        self.children.setdefault(kb.prehash, []).append(kb.digest)
        # attach any orphans waiting on this block
        for orphan in self.orphans.pop(kb.digest, []):
            self.add_keyblock(orphan)
        return True

    def add_miniblock(self, mb: MiniBlock) -> bool:
        if mb.digest in self.miniblocks:
            return False
        self.miniblocks[mb.digest] = mb
        self.miniblocks_by_height.setdefault(mb.height, []).append(mb.digest)
        return True

    def add_ensembleblock(self, eb: EnsembleBlock) -> bool:
        if eb.digest in self.ensembleblocks:
            return False
        self.ensembleblocks[eb.digest] = eb
        self.ensembleblocks_by_height.setdefault(eb.height, []).append(eb.digest)
        return True

    def tips(self) -> list[KeyBlock]:
        return [kb for d, kb in self.keyblocks.items() if d not in self.children]

    def best_tip(self) -> KeyBlock:
        return min(self.tips(), key=chain_preference_key)

    def main_chain(self) -> list[KeyBlock]:
        """Genesis-to-tip sequence under the fork-choice rule."""
        chain = [self.best_tip()]
        while chain[-1].height > 0:
            chain.append(self.keyblocks[chain[-1].prehash])
        chain.reverse()
        return chain

    def keyblocks_at_height(self, height: int) -> list[KeyBlock]:
        return [kb for kb in self.keyblocks.values() if kb.height == height]
