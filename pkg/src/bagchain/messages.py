"""Wire payloads exchanged between simulation nodes."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .chain import EnsembleBlock, KeyBlock, MiniBlock
from .hashing import HashDigest, canonical_hash, tagged, u64, utf8
from .ml.dataset import Dataset

Block = MiniBlock | EnsembleBlock | KeyBlock


@dataclass(frozen=True)
class BlockMessage:
    block: Block

    @property
    def digest(self) -> HashDigest:
        return self.block.digest


@dataclass(frozen=True)
class DatasetPublication:
    """Requester announcement carrying a validation or test dataset."""

    height: int
    kind: str  # "validation" | "test"
    timestamp: int
    task_id: HashDigest
    requester_id: str
    dataset: Dataset

    @cached_property
    def digest(self) -> HashDigest:
        return canonical_hash(
            tagged(
                "publication",
                u64(self.height),
                utf8(self.kind),
                u64(self.timestamp),
                self.task_id.value,
                utf8(self.requester_id),
            )
        )


@dataclass(frozen=True)
class FetchRequest:
    object_id: HashDigest
    requester: str

    @cached_property
    def digest(self) -> HashDigest:
        return canonical_hash(tagged("fetch-req", self.object_id.value, utf8(self.requester)))


@dataclass(frozen=True)
class FetchResponse:
    object_id: HashDigest
    payload: bytes | None  # None when deferred
    holder: str

    @property
    def deferred(self) -> bool:
        return self.payload is None

    @cached_property
    def digest(self) -> HashDigest:
        body = self.payload if self.payload is not None else b"<deferred>"
        return canonical_hash(
            tagged("fetch-resp", self.object_id.value, body, utf8(self.holder))
        )
