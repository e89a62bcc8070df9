"""Matplotlib figures for training curves, ablation bars and benchmark timings.

Uses the non-interactive Agg backend; every function writes a PNG and
returns its path.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def training_curve(report, path):
    """Per-batch training loss (left) and per-epoch test AUC (right)."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    losses = [x for epoch in report.batch_losses for x in epoch]
    ax1.plot(np.arange(len(losses)), losses, lw=0.8)
    edges = np.cumsum([len(e) for e in report.batch_losses])[:-1]
    for e in edges:
        ax1.axvline(e, color="grey", lw=0.5, ls=":")
    ax1.set_xlabel("batch")
    ax1.set_ylabel("train logloss")
    epochs = [r["epoch"] for r in report.epochs]
    ax2.plot(epochs, [r["test_auc"] for r in report.epochs], marker="o")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("test AUC")
    ax2.set_xticks(epochs)
    fig.suptitle(f"{report.backbone} / mode={report.mode}")
    return _save(fig, path)


def ablation_bars(records, path):
    """Grouped bars of AUC by backbone and mode. ``records`` are ablation rows."""
    backbones = list(dict.fromkeys(r["backbone"] for r in records))
    modes = list(dict.fromkeys(r["mode"] for r in records))
    width = 0.8 / max(1, len(modes))
    fig, ax = plt.subplots(figsize=(1.8 + 1.6 * len(backbones), 3.5))
    x = np.arange(len(backbones))
    for k, m in enumerate(modes):
        vals = []
        for b in backbones:
            hits = [r["auc"] for r in records if r["backbone"] == b and r["mode"] == m]
            vals.append(np.mean(hits) if hits else np.nan)
        ax.bar(x + (k - (len(modes) - 1) / 2) * width, vals, width, label=m)
    lo = np.nanmin([r["auc"] for r in records])
    ax.set_ylim(max(0.0, lo - 0.05), 1.0)
    ax.set_xticks(x)
    ax.set_xticklabels(backbones)
    ax.set_ylabel("test AUC")
    ax.legend(fontsize=8)
    return _save(fig, path)


def bench_bars(table, path):
    """Mean per-batch latency with one-std error bars, log scale."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    names = [r.variant for r in table.rows]
    means = np.array([r.mean_s for r in table.rows]) * 1e3
    stds = np.array([r.std_s for r in table.rows]) * 1e3
    ax.bar(names, means, yerr=stds, capsize=4, color=["C0", "C3", "C2"][:len(names)])
    ax.set_yscale("log")
    ax.set_ylabel(f"ms per batch of {table.batch_size}")
    for i, m in enumerate(means):
        ax.text(i, m, f"{m:.2f}", ha="center", va="bottom", fontsize=8)
    return _save(fig, path)
