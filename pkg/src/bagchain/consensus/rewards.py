"""Reward allocation rules encoded in Key Block payloads."""

from __future__ import annotations

from ..chain import PayloadRecord


def fee_shares(fee: int, producers: list[str]) -> tuple[PayloadRecord, ...]:
    """Distribute a task fee evenly over the distinct producers of the
    winning Ensemble Block's MiniBlocks.

    The integer-division remainder goes one unit each to the
    lexicographically smallest payee IDs, so shares always sum to the fee.
    """
    payees = sorted(set(producers))
    if not payees or fee == 0:
        return ()
    share, remainder = divmod(fee, len(payees))
    return tuple(
        PayloadRecord("training-fee-share", payee, share + (1 if i < remainder else 0))
        for i, payee in enumerate(payees)
    )


def build_payload(
    winner_producers: list[str], fee: int, keyblock_miner: str, block_reward: int
) -> tuple[PayloadRecord, ...]:
    """Canonical payload: fee shares sorted by payee, then the Key Block
    reward to the block's own generator."""
    records = list(fee_shares(fee, winner_producers))
    records.append(PayloadRecord("keyblock-reward", keyblock_miner, block_reward))
    return tuple(records)
