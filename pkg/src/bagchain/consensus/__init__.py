from .miner import Miner, Outbound, ProtocolConfig, STRATEGIES
from .requester import RequesterState, TaskSchedule
from .rewards import build_payload, fee_shares
from .validation import (
    EvalCache,
    PENDING,
    Reason,
    Status,
    VALID,
    ValidationResult,
    ensemble_metric,
    prehash_majority,
    validate_ensembleblock,
    validate_keyblock,
    validate_miniblock,
)

__all__ = [
    "Miner",
    "Outbound",
    "ProtocolConfig",
    "STRATEGIES",
    "RequesterState",
    "TaskSchedule",
    "build_payload",
    "fee_shares",
    "EvalCache",
    "PENDING",
    "Reason",
    "Status",
    "VALID",
    "ValidationResult",
    "ensemble_metric",
    "prehash_majority",
    "validate_ensembleblock",
    "validate_keyblock",
    "validate_miniblock",
]
