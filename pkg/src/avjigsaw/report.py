"""Report rendering: delimited tables plus matplotlib figures."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .pipeline import StageCounts, stats_totals  # noqa: E402
from .types import RewardBreakdown  # noqa: E402

STAGE_LABELS = ("Raw", "After Stage 1", "After Stage 2", "Built")


def write_stats_csv(table: Dict[str, StageCounts], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "raw", "after_stage1", "after_stage2", "built"])
        for tag, c in table.items():
            writer.writerow([tag, c.raw, c.after_stage1, c.after_stage2, c.built])
        total = stats_totals(table)
        writer.writerow(["total", total.raw, total.after_stage1,
                         total.after_stage2, total.built])
    return path


def plot_stage_funnel(table: Dict[str, StageCounts], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(7, 4))
    tags = list(table)
    n_stages = len(STAGE_LABELS)
    width = 0.8 / max(len(tags), 1)
    for i, tag in enumerate(tags):
        c = table[tag]
        values = [c.raw, c.after_stage1, c.after_stage2, c.built]
        offsets = [s + i * width for s in range(n_stages)]
        ax.bar(offsets, values, width=width, label=tag)
    ax.set_xticks([s + 0.4 - width / 2 for s in range(n_stages)])
    ax.set_xticklabels(STAGE_LABELS)
    ax.set_ylabel("samples")
    ax.set_title("Filtering funnel by source")
    if tags:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_rewards_csv(breakdowns: Sequence[RewardBreakdown], path,
                      ids: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "r_pos", "r_cont", "lambda", "r_fmt", "r_rep",
                         "r_total", "format_ok", "parsed_ok", "perfect"])
        for i, b in enumerate(breakdowns):
            row_id = ids[i] if i < len(ids) else str(i)
            writer.writerow([row_id, b.r_pos, b.r_cont, b.lam, b.r_fmt, b.r_rep,
                             b.r_total, b.format_ok, b.parsed_ok, b.perfect])
    return path


def plot_reward_histogram(breakdowns: Sequence[RewardBreakdown], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    totals = [b.r_total for b in breakdowns]
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    axes[0].hist(totals, bins=24, color="#4878a8", edgecolor="black")
    axes[0].set_xlabel("total reward")
    axes[0].set_ylabel("rollouts")
    axes[0].set_title("Reward distribution")
    if breakdowns:
        n = len(breakdowns)
        means = [sum(b.r_pos for b in breakdowns) / n,
                 sum(b.r_cont for b in breakdowns) / n,
                 sum(b.r_fmt for b in breakdowns) / n,
                 sum(b.r_rep for b in breakdowns) / n]
        axes[1].bar(["r_pos", "r_cont", "r_fmt", "r_rep"], means, color="#70a870")
        axes[1].axhline(0.0, color="black", linewidth=0.8)
        axes[1].set_title("Mean components")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def write_stats_report(table: Dict[str, StageCounts], out_dir) -> List[Path]:
    out_dir = Path(out_dir)
    return [write_stats_csv(table, out_dir / "stats.csv"),
            plot_stage_funnel(table, out_dir / "stage_funnel.png")]


def write_score_report(breakdowns: Sequence[RewardBreakdown], out_dir,
                       ids: Sequence[str] = ()) -> List[Path]:
    out_dir = Path(out_dir)
    return [write_rewards_csv(breakdowns, out_dir / "rewards.csv", ids),
            plot_reward_histogram(breakdowns, out_dir / "reward_histogram.png")]
