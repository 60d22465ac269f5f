"""Canonical byte encoding, SHA-256 digests, and Merkle roots.

Every object that ends up inside a block is reduced to a canonical byte
string before hashing: fields are serialized in declaration order, each
chunk is length-prefixed with a big-endian u64, and a short type tag keeps
encodings of different object kinds disjoint. Integers are fixed-width
big-endian, floats are IEEE-754 big-endian doubles.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

DIGEST_SIZE = 32


@dataclass(frozen=True, order=True)
class HashDigest:
    """256-bit opaque digest; equality and ordering are bitwise."""

    value: bytes

    def __post_init__(self) -> None:
        if len(self.value) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(self.value)}")

    @property
    def hex(self) -> str:
        return self.value.hex()

    def as_int(self) -> int:
        return int.from_bytes(self.value, "big")

    def __repr__(self) -> str:
        return f"HashDigest({self.value.hex()[:12]}…)"


ZERO_DIGEST = HashDigest(b"\x00" * DIGEST_SIZE)


def u64(n: int) -> bytes:
    if n < 0 or n >= 1 << 64:
        raise ValueError(f"u64 out of range: {n}")
    return n.to_bytes(8, "big")


def i64(n: int) -> bytes:
    return n.to_bytes(8, "big", signed=True)


def f64(x: float) -> bytes:
    return struct.pack(">d", x)


def utf8(s: str) -> bytes:
    return s.encode("utf-8")


def encode_fields(*chunks: bytes) -> bytes:
    """Length-prefix each chunk and concatenate in field order."""
    out = bytearray()
    for chunk in chunks:
        out += u64(len(chunk))
        out += chunk
    return bytes(out)


def tagged(tag: str, *chunks: bytes) -> bytes:
    return encode_fields(utf8(tag), *chunks)


def sha256(data: bytes) -> HashDigest:
    return HashDigest(hashlib.sha256(data).digest())


def canonical_hash(obj) -> HashDigest:
    """Digest of an object's canonical byte encoding.

    Accepts raw bytes or anything exposing ``canonical_bytes()``.
    """
    if isinstance(obj, bytes):
        return sha256(obj)
    if isinstance(obj, HashDigest):
        return sha256(obj.value)
    encode = getattr(obj, "canonical_bytes", None)
    if encode is None:
        raise TypeError(f"object of type {type(obj).__name__} has no canonical encoding")
    return sha256(encode())


def merkle_root(leaves: list[bytes]) -> HashDigest:
    """Merkle root over leaf encodings; odd levels duplicate the last node."""
    if not leaves:
        return ZERO_DIGEST
    level = [sha256(leaf).value for leaf in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [
            hashlib.sha256(level[i] + level[i + 1]).digest()
            for i in range(0, len(level), 2)
        ]
    return HashDigest(level[0])


def derive_seed(master: int, *labels) -> int:
    """Deterministic per-component seed fan-out from a master seed."""
    material = encode_fields(u64(master & ((1 << 64) - 1)), *(utf8(str(x)) for x in labels))
    return int.from_bytes(sha256(material).value[:8], "big")
