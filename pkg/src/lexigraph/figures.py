"""Static figure rendering for run and sweep reports.

Every function takes already-computed rows and writes one PNG next to
the delimited output it illustrates; nothing here feeds back into
training or evaluation.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SPLIT_COLORS = {"train": "tab:blue", "valid": "tab:orange", "test": "tab:green"}


def training_curves(records_by_seed: dict[int, list[dict]], path: str | Path) -> str:
    """Loss and accuracy per epoch, one thin line per seed plus the mean."""
    fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
    splits = sorted({r["split"] for recs in records_by_seed.values() for r in recs})
    for split in splits:
        color = SPLIT_COLORS.get(split, "tab:gray")
        per_seed = []
        for recs in records_by_seed.values():
            rows = sorted((r for r in recs if r["split"] == split), key=lambda r: r["epoch"])
            epochs = [r["epoch"] for r in rows]
            per_seed.append(rows)
            ax_loss.plot(epochs, [r["loss"] for r in rows], color=color, alpha=0.3, lw=1)
            ax_acc.plot(epochs, [r["accuracy"] for r in rows], color=color, alpha=0.3, lw=1)
        if per_seed and all(len(rows) == len(per_seed[0]) for rows in per_seed):
            epochs = [r["epoch"] for r in per_seed[0]]
            mean_loss = np.mean([[r["loss"] for r in rows] for rows in per_seed], axis=0)
            mean_acc = np.mean([[r["accuracy"] for r in rows] for rows in per_seed], axis=0)
            ax_loss.plot(epochs, mean_loss, color=color, lw=2, label=split)
            ax_acc.plot(epochs, mean_acc, color=color, lw=2, label=split)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_acc.set_xlabel("epoch")
    ax_acc.set_ylabel("accuracy")
    ax_acc.set_ylim(0, 1)
    handles, labels = ax_acc.get_legend_handles_labels()
    if handles:
        ax_acc.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def sweep_figure(rows: list[dict], axis: str, path: str | Path) -> str:
    """Mean accuracy and macro-F1 against the swept values.

    Numeric axes get line plots with per-seed scatter; categorical axes
    get grouped bars.
    """
    data = [r for r in rows if r["seed"] != "mean"]
    means = [r for r in rows if r["seed"] == "mean"]
    values = [r["value"] for r in means]
    numeric = all(isinstance(v, (int, float)) for v in values)
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    if numeric and values:
        order = np.argsort(values)
        xs = [values[i] for i in order]
        acc = [means[i]["accuracy"] for i in order]
        f1 = [means[i]["macro_f1"] for i in order]
        ax.plot(xs, acc, "o-", color="tab:blue", label="accuracy (mean)")
        ax.plot(xs, f1, "s--", color="tab:orange", label="macro-F1 (mean)")
        ax.scatter(
            [r["value"] for r in data],
            [r["accuracy"] for r in data],
            color="tab:blue", alpha=0.3, s=14,
        )
        ax.set_xlabel(axis)
    else:
        idx = np.arange(len(values))
        width = 0.38
        ax.bar(idx - width / 2, [m["accuracy"] for m in means], width,
               color="tab:blue", label="accuracy (mean)")
        ax.bar(idx + width / 2, [m["macro_f1"] for m in means], width,
               color="tab:orange", label="macro-F1 (mean)")
        for i, v in enumerate(values):
            pts = [r["accuracy"] for r in data if r["value"] == v]
            ax.scatter(np.full(len(pts), i - width / 2), pts, color="k", alpha=0.4, s=12)
        ax.set_xticks(idx)
        ax.set_xticklabels([str(v) for v in values])
        ax.set_xlabel(axis)
    ax.set_ylabel("score")
    ax.set_ylim(0, 1)
    ax.legend(loc="lower left")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def summary_figure(rows: list[dict], path: str | Path) -> str:
    """Final per-split scores: bars for the seed means, dots per seed."""
    means = [r for r in rows if r["seed"] == "mean"]
    data = [r for r in rows if r["seed"] != "mean"]
    splits = [m["split"] for m in means]
    idx = np.arange(len(splits))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(idx - width / 2, [m["accuracy"] for m in means], width,
           color="tab:blue", label="accuracy")
    ax.bar(idx + width / 2, [m["macro_f1"] for m in means], width,
           color="tab:orange", label="macro-F1")
    for i, split in enumerate(splits):
        pts = [r["accuracy"] for r in data if r["split"] == split]
        ax.scatter(np.full(len(pts), i - width / 2), pts, color="k", alpha=0.4, s=12)
        pts = [r["macro_f1"] for r in data if r["split"] == split]
        ax.scatter(np.full(len(pts), i + width / 2), pts, color="k", alpha=0.4, s=12)
    ax.set_xticks(idx)
    ax.set_xticklabels(splits)
    ax.set_ylim(0, 1)
    ax.set_ylabel("score")
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)
