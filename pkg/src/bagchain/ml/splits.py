"""Public/private training-set partitioners (IID and Dirichlet non-IID)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

MAX_DIRICHLET_RETRIES = 20


@dataclass(frozen=True)
class SplitPlan:
    kappa: float  # public dataset ratio |D_T| / |full|
    zeta: float = 0.0  # private per-partition ratio (IID mode)
    n_partitions: int = 1  # φ
    heterogeneity: str = "iid"  # "iid" | "dirichlet"
    beta: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.kappa <= 1.0:
            raise ValueError(f"kappa must be in (0, 1], got {self.kappa}")
        if self.heterogeneity not in ("iid", "dirichlet"):
            raise ValueError(f"unknown heterogeneity: {self.heterogeneity}")
        if self.heterogeneity == "iid" and self.kappa + self.zeta * self.n_partitions > 1.0 + 1e-12:
            raise ValueError("infeasible plan: kappa + zeta * partitions exceeds 1")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


def split_iid(full_train: Dataset, plan: SplitPlan) -> tuple[Dataset, list[Dataset]]:
    """Seeded-shuffle split into a public part of ⌊κn⌋ samples and φ
    disjoint private parts of ⌊ζn⌋ samples each."""
    if plan.heterogeneity != "iid":
        raise ValueError("plan is not IID")
    n = len(full_train)
    rng = np.random.default_rng(plan.seed)
    order = rng.permutation(n)
    n_public = int(np.floor(plan.kappa * n))
    per_part = int(np.floor(plan.zeta * n))
    if n_public + per_part * plan.n_partitions > n:
        raise ValueError("infeasible plan: splits exceed dataset size")
    public = full_train.subset(order[:n_public], role="public-train")
    parts = []
    offset = n_public
    for _ in range(plan.n_partitions):
        parts.append(full_train.subset(order[offset : offset + per_part], role="private"))
        offset += per_part
    return public, parts


def assign_parts(parts: list[Dataset], n_miners: int, rng: np.random.Generator) -> list[Dataset]:
    """Map φ partitions onto N miners: part i goes to miner i while both
    exist; extra miners reuse a randomly chosen part."""
    assigned = []
    for i in range(n_miners):
        if i < len(parts):
            assigned.append(parts[i])
        else:
            assigned.append(parts[int(rng.integers(len(parts)))])
    return assigned


def partition_iid(full_train: Dataset, plan: SplitPlan, n_miners: int) -> tuple[Dataset, list[Dataset]]:
    public, parts = split_iid(full_train, plan)
    rng = np.random.default_rng(plan.seed + 1)
    return public, assign_parts(parts, n_miners, rng)


def _largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """Apportion `total` items by `proportions` exactly."""
    quotas = proportions * total
    base = np.floor(quotas).astype(np.int64)
    short = total - int(base.sum())
    if short:
        remainders = quotas - base
        # ties broken toward the smaller index via stable sort on -remainder
        order = np.argsort(-remainders, kind="stable")
        base[order[:short]] += 1
    return base


def split_dirichlet(
    full_train: Dataset, plan: SplitPlan, n_miners: int
) -> tuple[Dataset, list[Dataset]]:
    """Public part as in the IID split; the private pool is partitioned per
    class by proportions drawn from Dir_N(β) with largest-remainder
    rounding, so per-class counts are conserved exactly."""
    n = len(full_train)
    rng = np.random.default_rng(plan.seed)
    order = rng.permutation(n)
    n_public = int(np.floor(plan.kappa * n))
    public = full_train.subset(order[:n_public], role="public-train")
    pool = full_train.subset(order[n_public:], role="private")
    if len(pool) < full_train.n_classes:
        raise ValueError("not every class can have a private sample")

    for _ in range(MAX_DIRICHLET_RETRIES):
        per_miner: list[list[np.ndarray]] = [[] for _ in range(n_miners)]
        for k in range(full_train.n_classes):
            class_idx = np.flatnonzero(pool.labels == k)
            rng.shuffle(class_idx)
            counts = _largest_remainder(rng.dirichlet([plan.beta] * n_miners), len(class_idx))
            offset = 0
            for j in range(n_miners):
                per_miner[j].append(class_idx[offset : offset + counts[j]])
                offset += counts[j]
        privates = [
            pool.subset(np.sort(np.concatenate(chunks)), role="private") for chunks in per_miner
        ]
        if all(len(p) > 0 for p in privates):
            return public, privates
    raise ValueError(
        f"a miner received zero samples in {MAX_DIRICHLET_RETRIES} Dirichlet draws"
    )


def partition_for_miners(
    full_train: Dataset, plan: SplitPlan, n_miners: int
) -> tuple[Dataset, list[Dataset]]:
    if plan.heterogeneity == "iid":
        return partition_iid(full_train, plan, n_miners)
    return split_dirichlet(full_train, plan, n_miners)
