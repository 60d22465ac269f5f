"""Exact rational accuracy values.

Block validation requires recomputed metrics to *equal* the asserted ones,
so accuracies are kept as (correct, total) integer pairs and compared by
cross multiplication instead of floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .hashing import encode_fields, u64


@dataclass(frozen=True)
class MetricValue:
    correct: int
    total: int

    def __post_init__(self) -> None:
        if self.total < 1 or not 0 <= self.correct <= self.total:
            raise ValueError(f"bad metric counts ({self.correct}, {self.total})")

    @property
    def value(self) -> float:
        return self.correct / self.total

    def as_fraction(self) -> Fraction:
        return Fraction(self.correct, self.total)

    def exceeds(self, floor: float) -> bool:
        # exact comparison; Fraction(float) is the float's exact binary value
        return self.as_fraction() > Fraction(floor)

    def canonical_bytes(self) -> bytes:
        return encode_fields(u64(self.correct), u64(self.total))

    def __eq__(self, other) -> bool:
        if not isinstance(other, MetricValue):
            return NotImplemented
        return self.correct * other.total == other.correct * self.total

    def __lt__(self, other: "MetricValue") -> bool:
        return self.correct * other.total < other.correct * self.total

    def __le__(self, other: "MetricValue") -> bool:
        return self.correct * other.total <= other.correct * self.total

    def __gt__(self, other: "MetricValue") -> bool:
        return other < self

    def __ge__(self, other: "MetricValue") -> bool:
        return other <= self

    def __hash__(self) -> int:
        return hash(self.as_fraction())

    def __repr__(self) -> str:
        return f"MetricValue({self.correct}/{self.total})"


ZERO_METRIC = MetricValue(0, 1)
