import pytest

from bagchain.chain import (
    BlockStore,
    KeyBlock,
    LearnerSpec,
    MiniBlock,
    PayloadRecord,
    ProtocolError,
    Task,
    chain_preference_key,
    make_genesis,
    payload_merkle_root,
    push_task_queue,
)
from bagchain.hashing import ZERO_DIGEST, HashDigest, sha256
from bagchain.metrics import ZERO_METRIC, MetricValue


def digest(i: int) -> HashDigest:
    return sha256(i.to_bytes(4, "big"))


def make_task(tag: int = 0) -> Task:
    return Task(
        train_commit=digest(100 + tag),
        val_commit=digest(200 + tag),
        test_commit=digest(300 + tag),
        learner_spec=LearnerSpec(),
    )


def make_keyblock(height: int, prehash: HashDigest, nonce: int = 0, metric=ZERO_METRIC):
    return KeyBlock(
        nonce=nonce,
        merkle_root=payload_merkle_root(()),
        timestamp=height,
        metric_best=metric,
        eb_entries=(),
        miner_id="M0",
        task_id=digest(height),
        task_queue=(digest(height + 1),),
        prehash=prehash,
        height=height,
    )


def test_task_rejects_duplicate_commitments():
    with pytest.raises(ValueError):
        Task(
            train_commit=digest(1),
            val_commit=digest(1),
            test_commit=digest(2),
            learner_spec=LearnerSpec(),
        )


def test_task_rejects_bad_floor_and_fee():
    with pytest.raises(ValueError):
        Task(digest(1), digest(2), digest(3), LearnerSpec(), metric_min=1.5)
    with pytest.raises(ValueError):
        Task(digest(1), digest(2), digest(3), LearnerSpec(), fee=-1)


def test_task_id_changes_with_any_field():
    assert make_task(0).task_id != make_task(1).task_id
    assert make_task(0).task_id == make_task(0).task_id


def test_block_digests_differ_across_fields():
    mb = MiniBlock(1, "M0", digest(1), digest(2), digest(3), 1)
    assert mb.digest != MiniBlock(1, "M1", digest(1), digest(2), digest(3), 1).digest
    assert mb.digest != MiniBlock(2, "M0", digest(1), digest(2), digest(3), 1).digest
    assert mb.digest != MiniBlock(1, "M0", digest(1), digest(2), digest(3), 2).digest


def test_keyblock_payload_outside_canonical_encoding():
    from dataclasses import replace

    kb = make_keyblock(1, ZERO_DIGEST)
    with_payload = replace(kb, payload=(PayloadRecord("keyblock-reward", "M0", 50),))
    assert kb.digest == with_payload.digest  # payload binds via merkle_root only


def test_payload_record_validation():
    with pytest.raises(ValueError):
        PayloadRecord("bribe", "M0", 1)
    with pytest.raises(ValueError):
        PayloadRecord("keyblock-reward", "M0", -5)


def test_push_task_queue():
    queue = (digest(1), digest(2), digest(3))
    assert push_task_queue(queue, digest(1), digest(9)) == (digest(2), digest(3), digest(9))
    with pytest.raises(ProtocolError):
        push_task_queue(queue, digest(2), digest(9))
    with pytest.raises(ProtocolError):
        push_task_queue((), digest(1), digest(9))


def test_genesis_shape():
    g = make_genesis((digest(1), digest(2)))
    assert g.height == 0
    assert g.prehash == ZERO_DIGEST
    assert g.task_queue == (digest(1), digest(2))
    assert g.metric_best == ZERO_METRIC


def test_fork_choice_prefers_height_then_metric_then_digest():
    g = make_genesis((digest(1),))
    taller = make_keyblock(2, g.digest)
    shorter = make_keyblock(1, g.digest)
    assert chain_preference_key(taller) < chain_preference_key(shorter)

    better = make_keyblock(1, g.digest, nonce=1, metric=MetricValue(9, 10))
    worse = make_keyblock(1, g.digest, nonce=2, metric=MetricValue(5, 10))
    assert chain_preference_key(better) < chain_preference_key(worse)

    a = make_keyblock(1, g.digest, nonce=3)
    b = make_keyblock(1, g.digest, nonce=4)
    expected = a if a.digest.value < b.digest.value else b
    assert min([a, b], key=chain_preference_key) is expected


def test_blockstore_orphan_buffering():
    g = make_genesis((digest(1),))
    store = BlockStore(g)
    kb1 = make_keyblock(1, g.digest)
    kb2 = make_keyblock(2, kb1.digest)
    assert not store.add_keyblock(kb2)  # parent unknown, buffered
    assert kb2.digest not in store.keyblocks
    assert store.add_keyblock(kb1)  # attaches the orphan too
    assert kb2.digest in store.keyblocks
    assert store.best_tip() == kb2
    assert [kb.height for kb in store.main_chain()] == [0, 1, 2]


def test_blockstore_rejects_height_gap():
    g = make_genesis((digest(1),))
    store = BlockStore(g)
    with pytest.raises(ProtocolError):
        store.add_keyblock(make_keyblock(5, g.digest))


def test_blockstore_tips_and_duplicates():
    g = make_genesis((digest(1),))
    store = BlockStore(g)
    kb1 = make_keyblock(1, g.digest, nonce=1)
    kb1b = make_keyblock(1, g.digest, nonce=2)
    assert store.add_keyblock(kb1)
    assert store.add_keyblock(kb1b)
    assert not store.add_keyblock(kb1)
    assert {kb.digest for kb in store.tips()} == {kb1.digest, kb1b.digest}
    assert len(store.keyblocks_at_height(1)) == 2
