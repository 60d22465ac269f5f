"""Validator mutation coverage: every tampered block must come back
INVALID with the matching reason code, while untouched fixtures validate
cleanly."""

from dataclasses import replace

from bagchain.consensus.validation import (
    Reason,
    Status,
    prehash_majority,
    validate_ensembleblock,
    validate_keyblock,
    validate_miniblock,
)
from bagchain.hashing import sha256
from bagchain.metrics import MetricValue
from bagchain.ml.tree import TrainedModel

from worldgen import EASY_TARGET, BLOCK_REWARD, altered_metric, build_world

WORLD = build_world(seed=0)


def validate_world_kb(world, kb=None, **overrides):
    kb = kb if kb is not None else world.keyblock
    args = dict(
        task=world.task,
        d_v=world.d_v,
        d_e=world.d_e,
        parent=world.genesis,
        target=EASY_TARGET,
        cfs_enabled=False,
        block_reward=BLOCK_REWARD,
        resolve_eb=world.resolve_eb,
        resolve_mb=world.resolve_mb,
        resolve_params=world.resolve_params,
        cache=world.cache,
    )
    args.update(overrides)
    return validate_keyblock(kb, **args)


# ----- honest fixtures ----------------------------------------------------


def test_honest_miniblocks_validate():
    for mb, model in zip(WORLD.miniblocks, WORLD.models):
        result = validate_miniblock(mb, model.params, WORLD.task, WORLD.d_v, WORLD.cache)
        assert result.ok, result


def test_honest_ensembleblock_validates():
    result = validate_ensembleblock(
        WORLD.ensembleblock,
        WORLD.task,
        WORLD.d_v,
        WORLD.genesis.digest,
        False,
        WORLD.resolve_mb,
        WORLD.resolve_params,
        WORLD.cache,
    )
    assert result.ok, result


def test_honest_keyblock_validates():
    assert validate_world_kb(WORLD).ok


# ----- MiniBlock mutations ------------------------------------------------


def test_flipped_parameter_bit_is_ownership_mismatch():
    mb = WORLD.miniblocks[0]
    params = bytearray(WORLD.models[0].params)
    params[-1] ^= 0x01
    result = validate_miniblock(mb, bytes(params), WORLD.task, WORLD.d_v, WORLD.cache)
    assert result.status is Status.INVALID
    assert result.reason is Reason.OWNERSHIP_MISMATCH


def test_copied_model_hash_under_other_miner_is_ownership_mismatch():
    victim = WORLD.miniblocks[0]
    plagiarized = replace(victim, miner_id="M9")
    result = validate_miniblock(
        plagiarized, WORLD.models[0].params, WORLD.task, WORLD.d_v, WORLD.cache
    )
    assert result.status is Status.INVALID
    assert result.reason is Reason.OWNERSHIP_MISMATCH


def test_unfetched_params_is_pending():
    result = validate_miniblock(WORLD.miniblocks[0], None, WORLD.task, WORLD.d_v, WORLD.cache)
    assert result.pending


def test_performance_floor_is_strict():
    strict_task = replace(WORLD.task, metric_min=1.0)
    mb = replace(WORLD.miniblocks[0], task_id=strict_task.task_id)
    result = validate_miniblock(mb, WORLD.models[0].params, strict_task, WORLD.d_v, WORLD.cache)
    assert result.status is Status.INVALID
    assert result.reason is Reason.UNDERPERFORMANCE


def test_wrong_task_rejected():
    other = WORLD.schedule.task_for_height(2)
    mb = replace(WORLD.miniblocks[0], task_id=other.task_id)
    result = validate_miniblock(mb, WORLD.models[0].params, WORLD.task, WORLD.d_v, WORLD.cache)
    assert result.reason is Reason.WRONG_HEIGHT_OR_TASK


# ----- Ensemble Block mutations -------------------------------------------


def eb_result(eb, cfs=False, parent=None):
    return validate_ensembleblock(
        eb,
        WORLD.task,
        WORLD.d_v,
        parent if parent is not None else WORLD.genesis.digest,
        cfs,
        WORLD.resolve_mb,
        WORLD.resolve_params,
        WORLD.cache,
    )


def test_overstated_metric_v_detected():
    eb = replace(WORLD.ensembleblock, metric_v=altered_metric(WORLD.ensembleblock.metric_v))
    result = eb_result(eb)
    assert result.status is Status.INVALID
    assert result.reason is Reason.METRIC_MISMATCH


def test_empty_ensemble_rejected():
    eb = replace(WORLD.ensembleblock, miniblock_hashes=())
    assert eb_result(eb).reason is Reason.EMPTY_ENSEMBLE


def test_duplicate_reference_rejected():
    ref = WORLD.ensembleblock.miniblock_hashes[0]
    eb = replace(WORLD.ensembleblock, miniblock_hashes=(ref, ref))
    assert eb_result(eb).reason is Reason.DUPLICATE_MODEL


def test_stale_prehash_rejected_without_fork_sharing():
    assert eb_result(WORLD.ensembleblock, parent=WORLD.keyblock.digest).reason is (
        Reason.STALE_PREHASH
    )


def test_fork_sharing_accepts_cross_fork_miniblocks():
    # same Ensemble Block, arbitrary parent: fine once sharing is on
    assert eb_result(WORLD.ensembleblock, cfs=True, parent=WORLD.keyblock.digest).ok


def test_fork_sharing_rejects_duplicate_base_model():
    # two MiniBlocks carrying byte-identical parameters on different forks
    model = WORLD.models[0]
    twin = replace(WORLD.miniblocks[0], prehash=WORLD.keyblock.digest)
    world_mbs = WORLD.miniblocks + [twin]

    def resolve_mb(d):
        return next((mb for mb in world_mbs if mb.digest == d), None)

    eb = replace(
        WORLD.ensembleblock,
        miniblock_hashes=(WORLD.miniblocks[0].digest, twin.digest),
    )
    result = validate_ensembleblock(
        eb, WORLD.task, WORLD.d_v, WORLD.genesis.digest, True,
        resolve_mb, WORLD.resolve_params, WORLD.cache,
    )
    assert result.reason is Reason.DUPLICATE_MODEL
    assert sha256(model.params) == sha256(WORLD.models[0].params)


def test_unresolvable_miniblock_is_pending():
    eb = replace(
        WORLD.ensembleblock,
        miniblock_hashes=WORLD.ensembleblock.miniblock_hashes + (sha256(b"missing"),),
    )
    assert eb_result(eb).pending


# ----- Key Block mutations ------------------------------------------------


def test_nonce_failing_target_gate_rejected():
    result = validate_world_kb(WORLD, target=1)  # no digest beats a target of 1
    assert result.status is Status.INVALID
    assert result.reason is Reason.POW_FAIL


def test_metric_best_below_listed_entry():
    kb = replace(WORLD.keyblock, metric_best=altered_metric(WORLD.keyblock.metric_best, -1))
    from worldgen import mine

    kb = mine(kb)
    assert validate_world_kb(WORLD, kb=kb).reason is Reason.METRIC_BEST_INCONSISTENT


def test_entry_metric_recomputed_on_test_set():
    from worldgen import mine

    (eb_digest, metric_e), = WORLD.keyblock.eb_entries
    lifted = altered_metric(metric_e)
    kb = mine(replace(WORLD.keyblock, eb_entries=((eb_digest, lifted),), metric_best=lifted))
    assert validate_world_kb(WORLD, kb=kb).reason is Reason.METRIC_MISMATCH


def test_entries_must_be_sorted():
    from worldgen import mine

    (eb_digest, metric_e), = WORLD.keyblock.eb_entries
    low = MetricValue(0, metric_e.total)
    kb = mine(
        replace(
            WORLD.keyblock,
            eb_entries=((eb_digest, low), (eb_digest, metric_e)),
            metric_best=low,
        )
    )
    assert validate_world_kb(WORLD, kb=kb).reason is Reason.ENTRY_ORDER


def test_task_queue_tampering_detected():
    from worldgen import mine

    queue = WORLD.keyblock.task_queue
    kb = mine(replace(WORLD.keyblock, task_queue=queue[::-1]))
    assert validate_world_kb(WORLD, kb=kb).reason is Reason.TASK_QUEUE_INVALID


def test_misallocated_fee_detected():
    from worldgen import mine
    from bagchain.chain import PayloadRecord, payload_merkle_root

    bad_payload = (
        PayloadRecord("training-fee-share", "M0", sum(r.amount for r in WORLD.keyblock.payload)),
    )
    kb = mine(
        replace(
            WORLD.keyblock,
            payload=bad_payload,
            merkle_root=payload_merkle_root(bad_payload),
        )
    )
    assert validate_world_kb(WORLD, kb=kb).reason is Reason.PAYLOAD_INVALID


def test_payload_merkle_root_mismatch_detected():
    from worldgen import mine
    from bagchain.chain import payload_merkle_root

    kb = mine(replace(WORLD.keyblock, merkle_root=payload_merkle_root(())))
    assert validate_world_kb(WORLD, kb=kb).reason is Reason.PAYLOAD_INVALID


def test_missing_parent_is_pending():
    result = validate_world_kb(WORLD, parent=None)
    assert result.pending
    assert result.reason is Reason.MISSING_PARENT


def test_prehash_majority_plurality_and_tie():
    mbs = WORLD.miniblocks
    assert prehash_majority(mbs) == WORLD.genesis.digest
    other = replace(mbs[0], prehash=WORLD.keyblock.digest)
    # 2 genesis votes vs 1 other: plurality holds
    assert prehash_majority([other, mbs[1], mbs[2]]) == WORLD.genesis.digest
    # 1 vs 1 tie: smaller digest wins
    tie = [other, mbs[1]]
    expected = min(WORLD.keyblock.digest, WORLD.genesis.digest, key=lambda d: d.value)
    assert prehash_majority(tie) == expected


def test_honest_fixture_battery():
    # many independently generated worlds, zero false rejections
    for seed in range(100):
        world = build_world(seed=seed)
        assert validate_world_kb(world).ok, seed
