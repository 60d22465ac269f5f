import hashlib

import pytest
from hypothesis import given
from hypothesis import strategies as st

from bagchain.hashing import (
    DIGEST_SIZE,
    ZERO_DIGEST,
    HashDigest,
    canonical_hash,
    derive_seed,
    encode_fields,
    merkle_root,
    sha256,
    tagged,
    u64,
    utf8,
)

# published SHA-256 test vector
ABC_DIGEST = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"


def test_sha256_known_vector():
    assert sha256(b"abc").hex == ABC_DIGEST


def test_digest_requires_32_bytes():
    with pytest.raises(ValueError):
        HashDigest(b"\x00" * 31)
    assert len(ZERO_DIGEST.value) == DIGEST_SIZE
    assert ZERO_DIGEST.as_int() == 0


def test_digest_ordering_is_bytewise():
    a = HashDigest(b"\x00" * 31 + b"\x01")
    b = HashDigest(b"\x00" * 31 + b"\x02")
    assert a < b
    assert a.as_int() < b.as_int()


def test_u64_bounds():
    assert u64(0) == b"\x00" * 8
    assert u64(2**64 - 1) == b"\xff" * 8
    with pytest.raises(ValueError):
        u64(-1)
    with pytest.raises(ValueError):
        u64(2**64)


@given(st.lists(st.binary(max_size=40), max_size=6), st.lists(st.binary(max_size=40), max_size=6))
def test_encode_fields_injective(a, b):
    if a != b:
        assert encode_fields(*a) != encode_fields(*b)
    else:
        assert encode_fields(*a) == encode_fields(*b)


def test_tagged_separates_types():
    assert tagged("miniblock", b"x") != tagged("keyblock", b"x")


def test_canonical_hash_accepts_bytes_and_objects():
    assert canonical_hash(b"abc").hex == ABC_DIGEST
    with pytest.raises(TypeError):
        canonical_hash(42)


def test_merkle_root_empty_and_single():
    assert merkle_root([]) == ZERO_DIGEST
    assert merkle_root([b"leaf"]) == sha256(b"leaf")


def test_merkle_root_matches_manual_three_leaf_tree():
    # independent oracle: hash leaves, duplicate the odd one, fold pairwise
    leaves = [b"a", b"b", b"c"]
    h = [hashlib.sha256(x).digest() for x in leaves]
    ab = hashlib.sha256(h[0] + h[1]).digest()
    cc = hashlib.sha256(h[2] + h[2]).digest()
    root = hashlib.sha256(ab + cc).digest()
    assert merkle_root(leaves).value == root


def test_merkle_root_depends_on_order():
    assert merkle_root([b"a", b"b"]) != merkle_root([b"b", b"a"])


def test_derive_seed_stable_and_label_sensitive():
    assert derive_seed(1, "x", 2) == derive_seed(1, "x", 2)
    assert derive_seed(1, "x", 2) != derive_seed(1, "x", 3)
    assert derive_seed(1, "x") != derive_seed(2, "x")
    assert 0 <= derive_seed(7, "anything") < 2**64


def test_utf8_is_plain_encoding():
    assert utf8("M0") == b"M0"
