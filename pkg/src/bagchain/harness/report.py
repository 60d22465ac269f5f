"""Result reporting: delimited output, a text summary, optional figures.

Output files are byte-stable for a given result so reruns can be compared
with a plain diff.
"""

from __future__ import annotations

import csv
import os

from .driver import SimulationResult


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_heights_csv(result: SimulationResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [
                "height",
                "accuracy",
                "best_possible",
                "mean_base",
                "miniblocks_total",
                "miniblocks_used",
                "keyblocks_observed",
                "rounds",
            ]
        )
        for r in result.records:
            writer.writerow(
                [
                    r.height,
                    _fmt(r.accuracy),
                    _fmt(r.best_possible),
                    _fmt(r.mean_base),
                    r.miniblocks_total,
                    r.miniblocks_used,
                    r.keyblocks_observed,
                    r.rounds,
                ]
            )


def write_base_accuracy_csv(result: SimulationResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["height", "miner", "accuracy"])
        for r in result.records:
            for miner in sorted(r.base_accuracies):
                writer.writerow([r.height, miner, _fmt(r.base_accuracies[miner])])


def write_rewards_csv(result: SimulationResult, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["payee", "amount"])
        for payee in sorted(result.rewards):
            writer.writerow([payee, result.rewards[payee]])


def write_summary(result: SimulationResult, path: str) -> None:
    lines = [
        f"heights_completed: {len(result.records)}",
        f"mean_accuracy: {_fmt(result.mean_accuracy)}",
        f"wastage: {_fmt(result.wastage)}",
        f"rounds_used: {result.rounds_used}",
        f"messages_sent: {result.messages_sent}",
        f"converged: {str(result.converged).lower()}",
        f"rejected_late_miniblocks: {result.rejected_late_miniblocks}",
        f"cfs: {str(result.scenario.cfs).lower()}",
        f"seed: {result.scenario.seed}",
        "chain: " + ",".join(d[:16] for d in result.chain_digests),
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_figures(result: SimulationResult, out_dir: str) -> list[str]:
    """Render accuracy and block-usage figures; returns the written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    heights = [r.height for r in result.records]

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(heights, [r.accuracy for r in result.records], "o-", label="winning ensemble")
    ax.plot(heights, [r.best_possible for r in result.records], "s--", label="pooled ceiling")
    ax.plot(heights, [r.mean_base for r in result.records], "^:", label="mean base model")
    ax.set_xlabel("height")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    ax.grid(True, alpha=0.3)
    path = os.path.join(out_dir, "accuracy.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(heights, [r.miniblocks_total for r in result.records], alpha=0.4, label="generated")
    ax.bar(heights, [r.miniblocks_used for r in result.records], alpha=0.9, label="in winning block")
    ax.set_xlabel("height")
    ax.set_ylabel("base-model blocks")
    ax.legend()
    ax.grid(True, alpha=0.3, axis="y")
    path = os.path.join(out_dir, "block_usage.png")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written


def write_report(result: SimulationResult, out_dir: str, plots: bool = False) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "heights.csv": write_heights_csv,
        "base_accuracy.csv": write_base_accuracy_csv,
        "rewards.csv": write_rewards_csv,
        "summary.txt": write_summary,
    }
    written = []
    for name, writer in paths.items():
        path = os.path.join(out_dir, name)
        writer(result, path)
        written.append(path)
    if plots:
        written.extend(write_figures(result, out_dir))
    return written
