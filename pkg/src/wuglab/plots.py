"""Simple matplotlib figures written next to the CSV reports.

Figures are for eyeballing runs; the CSVs are the contract.  Everything
is scatter, line, or bar, rendered headless and saved as SVG.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def convergence_plot(log_rows, path):
    """log_rows: (epoch, loss, acc_overall, acc_regular, acc_irregular)."""
    rows = np.array([r[:5] for r in log_rows], dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rows[:, 0], rows[:, 3], label="regular", color="tab:blue")
    ax.plot(rows[:, 0], rows[:, 4], label="irregular", color="tab:red")
    ax.plot(rows[:, 0], rows[:, 2], label="overall", color="tab:gray",
            linestyle="--")
    ax.set_xlabel("epoch")
    ax.set_ylabel("training accuracy (%)")
    ax.set_ylim(-2, 102)
    ax.legend()
    return _save(fig, path)


def correlation_scatter(values_by_pool, path, title="correlation by seed"):
    """values_by_pool: {pool label: [(seed, value or None), ...]}."""
    fig, ax = plt.subplots(figsize=(5, 4))
    rng = np.random.default_rng(0)
    for i, (pool, pairs) in enumerate(sorted(values_by_pool.items())):
        xs, ys = [], []
        for _, value in pairs:
            if value is None:
                continue
            xs.append(i + rng.uniform(-0.12, 0.12))
            ys.append(value)
        ax.scatter(xs, ys, alpha=0.75, label=pool)
    ax.set_xticks(range(len(values_by_pool)))
    ax.set_xticklabels(sorted(values_by_pool))
    ax.set_ylabel("correlation")
    ax.set_title(title)
    ax.axhline(0.0, color="gray", linewidth=0.5)
    return _save(fig, path)


def cr5_scatter(values, path):
    """values: [(seed, cr5), ...]."""
    fig, ax = plt.subplots(figsize=(4, 4))
    rng = np.random.default_rng(0)
    xs = [rng.uniform(-0.08, 0.08) for _ in values]
    ax.scatter(xs, [v for _, v in values], alpha=0.8)
    ax.set_xlim(-0.5, 0.5)
    ax.set_xticks([])
    ax.set_ylim(0, 1)
    ax.set_ylabel("complete recall@5")
    return _save(fig, path)


def second_place_bar(counts, path):
    """counts: {(item, form): n_seeds} -> sorted bar chart."""
    values = sorted(counts.values(), reverse=True)
    fig, ax = plt.subplots(figsize=(7, 3.2))
    ax.bar(range(len(values)), values, width=1.0)
    ax.set_xlabel("second-place forms (sorted)")
    ax.set_ylabel("seeds agreeing")
    return _save(fig, path)


def production_table_bars(items, human_shares, model_shares, path):
    """Grouped per-item bars, humans above, model below, one panel per
    category block."""
    categories = []
    for item in items:
        if item.category not in categories:
            categories.append(item.category)
    fig, axes = plt.subplots(2, len(categories),
                             figsize=(2.2 * len(categories) + 1, 6),
                             squeeze=False, sharey=True)
    roles = ["reg", "irr1", "irr2", "other"]
    colors = ["tab:blue", "tab:red", "tab:orange", "tab:gray"]
    for c, cat in enumerate(categories):
        block = [it for it in items if it.category == cat]
        for r, (source, shares) in enumerate(
                (("humans", human_shares), ("model", model_shares))):
            ax = axes[r][c]
            x = np.arange(len(block))
            for k, role in enumerate(roles):
                ys = [shares[it.item_id].get(role, 0.0) for it in block]
                ax.bar(x + (k - 1.5) * 0.2, ys, width=0.2, color=colors[k],
                       label=role if (r == 0 and c == 0) else None)
            ax.set_xticks(x)
            ax.set_xticklabels([it.item_id for it in block], rotation=90,
                               fontsize=6)
            if c == 0:
                ax.set_ylabel(f"{source}\nproduction share")
            if r == 0:
                ax.set_title(cat, fontsize=8)
    fig.legend(loc="upper right", fontsize=7)
    return _save(fig, path)


def category_means_bars(human_means, model_means, path):
    """Two panels: mean regular share (top) and mean suggested-irregular
    share (bottom) per category, humans vs model."""
    cats = [m.category for m in human_means]
    x = np.arange(len(cats))
    fig, axes = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    for ax, attr, label in ((axes[0], "regular_mean", "regular"),
                            (axes[1], "irregular_mean", "suggested irregular")):
        ax.bar(x - 0.18, [getattr(m, attr) for m in human_means], width=0.36,
               label="humans", color="tab:blue")
        model_by_cat = {m.category: m for m in model_means}
        ax.bar(x + 0.18, [getattr(model_by_cat[c], attr) if c in model_by_cat
                          else 0.0 for c in cats], width=0.36,
               label="model", color="tab:red")
        ax.set_ylabel(f"mean {label}\nproduction")
    axes[1].set_xticks(x)
    axes[1].set_xticklabels(cats, rotation=30, ha="right", fontsize=8)
    axes[0].legend()
    return _save(fig, path)


def epoch_sweep_plot(rows, path):
    """rows: (epoch, rho_reg, rho_irr, mean_top_prob, irr_accuracy_pct),
    already averaged over seeds; correlations may be None."""
    rows = list(rows)
    epochs = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))

    def series(idx):
        return [np.nan if r[idx] is None else r[idx] for r in rows]

    ax.plot(epochs, series(1), marker="o", label="rho regular")
    ax.plot(epochs, series(2), marker="o", label="rho irregular")
    ax.plot(epochs, series(3), marker="s", label="mean top probability")
    ax2 = ax.twinx()
    ax2.plot(epochs, series(4), marker="^", color="tab:gray",
             label="irregular accuracy (%)")
    ax2.set_ylabel("irregular accuracy (%)")
    ax2.set_ylim(-2, 102)
    ax.set_xlabel("epoch")
    ax.set_ylabel("correlation / probability")
    handles, labels = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(handles + h2, labels + l2, fontsize=8)
    return _save(fig, path)


def pca_scatter(cloud, path, title=""):
    """2-D projected cloud, coloured by class."""
    if cloud.vectors.shape[1] < 2:
        raise ValueError("need a 2-D projection to scatter")
    fig, ax = plt.subplots(figsize=(6, 5))
    classes = sorted(set(cloud.classes))
    cmap = plt.get_cmap("tab10")
    for i, cls in enumerate(classes):
        idx = [j for j, c in enumerate(cloud.classes) if c == cls]
        ax.scatter(cloud.vectors[idx, 0], cloud.vectors[idx, 1],
                   s=14, color=cmap(i % 10), label=cls, alpha=0.8)
    for j, label in enumerate(cloud.labels):
        if len(cloud.labels) <= 60:
            ax.annotate(label, cloud.vectors[j, :2], fontsize=5, alpha=0.7)
    ax.set_xlabel("pc1")
    ax.set_ylabel("pc2")
    ax.set_title(title)
    ax.legend(fontsize=7)
    return _save(fig, path)
