"""Scenario files: flat ``key = value`` text describing one simulation."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Scenario:
    miners: int = 10
    topology: str = "full"  # "full" | "mesh" | "file:<path>"
    mesh_edge_prob: float = 0.4
    bandwidth: float = 0.5
    keyblock_delay: int | None = None  # uniform per-link Key Block override

    dataset: str = "synthetic"  # "synthetic" | "csv:<path>"
    synth_train: int = 2000
    synth_holdout: int = 600
    synth_features: int = 8
    synth_classes: int = 4
    synth_separation: float = 1.5

    kappa: float = 0.4
    zeta: float = 0.06
    partitions: int = 10
    heterogeneity: str = "iid"  # "iid" | "dirichlet"
    beta: float = 0.5

    learner: str = "cart"
    max_depth: int = 8
    min_leaf: int = 5
    metric_min: float = 0.0

    target_exp: int = 244  # PoW target is 2**target_exp - 1
    hash_trials: int = 1
    phase1: int = 100
    phase2: int = 10
    queue_len: int = 4
    publication_delay: int = 1

    cfs: bool = False
    heights: int = 3
    seed: int = 0
    fee: int = 120
    block_reward: int = 50
    strategies: str = ""  # e.g. "M3:plagiarist,M7:withholder"
    round_budget: int = 0  # 0 means auto

    miniblock_size: float = 2.0
    ensembleblock_size: float = 2.0
    keyblock_size: float = 6.0
    model_size: float = 2.0

    def __post_init__(self) -> None:
        if self.miners < 1:
            raise ValueError("need at least one miner")
        if self.heights < 1:
            raise ValueError("need at least one height")
        if not (self.topology in ("full", "mesh") or self.topology.startswith("file:")):
            raise ValueError(f"unknown topology: {self.topology}")
        if not (self.dataset == "synthetic" or self.dataset.startswith("csv:")):
            raise ValueError(f"unknown dataset source: {self.dataset}")
        if self.heterogeneity not in ("iid", "dirichlet"):
            raise ValueError(f"unknown heterogeneity: {self.heterogeneity}")
        if self.target_exp < 1 or self.target_exp > 256:
            raise ValueError("target_exp must be in [1, 256]")
        if self.phase1 < 1 or self.phase2 < 1:
            raise ValueError("phase lengths must be positive")
        if self.queue_len < 1:
            raise ValueError("queue_len must be positive")

    @property
    def target(self) -> int:
        return 2**self.target_exp - 1

    def strategy_map(self) -> dict[str, str]:
        out: dict[str, str] = {}
        if not self.strategies:
            return out
        for part in self.strategies.split(","):
            miner_id, _, name = part.strip().partition(":")
            if not name:
                raise ValueError(f"bad strategy entry: {part!r}")
            out[miner_id] = name
        return out

    def miner_ids(self) -> list[str]:
        return [f"M{i}" for i in range(self.miners)]


_FIELD_TYPES = {f.name: f.type for f in fields(Scenario)}


def _coerce(name: str, raw: str):
    if name not in _FIELD_TYPES:
        raise ValueError(f"unknown scenario key: {name}")
    kind = _FIELD_TYPES[name]
    if kind == "bool":
        if raw.lower() in ("on", "true", "yes", "1"):
            return True
        if raw.lower() in ("off", "false", "no", "0"):
            return False
        raise ValueError(f"bad boolean for {name}: {raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "int | None":
        return None if raw.lower() in ("none", "") else int(raw)
    if kind == "float":
        return float(raw)
    return raw


def parse_scenario_text(text: str) -> Scenario:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, _, raw = line.partition("=")
        values[key.strip()] = _coerce(key.strip(), raw.strip())
    return Scenario(**values)


def load_scenario(path: str) -> Scenario:
    with open(path) as fh:
        return parse_scenario_text(fh.read())


def apply_overrides(scenario: Scenario, overrides: dict[str, str]) -> Scenario:
    coerced = {k: _coerce(k, v) for k, v in overrides.items()}
    return replace(scenario, **coerced)
