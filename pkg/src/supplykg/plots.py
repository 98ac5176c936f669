"""Figure rendering for CLI artifacts: weight histograms, loss curves, AUC bars.

Each figure is written next to its delimited counterpart and carries the
config fingerprint as a footer note.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluate import SNLP_REFERENCE_AUC, EvalReport, SPLIT_NAMES  # noqa: E402
from .ontology import RELATIONS  # noqa: E402


def _footer(fig, fingerprint: str | None) -> None:
    if fingerprint:
        fig.text(0.99, 0.01, f"config {fingerprint}", ha="right", va="bottom",
                 fontsize=6, color="0.5")


def save_weight_histogram(rows, path, title: str, fingerprint: str | None = None) -> None:
    """Bar chart of (bin_lo, bin_hi, count) rows on a log count axis."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        centers = [(lo + hi) / 2.0 for lo, hi, _ in rows]
        widths = [hi - lo + 1 for lo, hi, _ in rows]
        ax.bar(centers, [c for _, _, c in rows], width=widths, color="#4878a8",
               edgecolor="white")
        if any(c > 0 for _, _, c in rows):
            ax.set_yscale("symlog")
    ax.set_xlabel("pair weight")
    ax.set_ylabel("pair count")
    ax.set_title(title)
    _footer(fig, fingerprint)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_loss_curve(history, path, fingerprint: str | None = None) -> None:
    """Per-step training loss with per-epoch validation AUC overlaid."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot([r.step for r in history], [r.loss for r in history],
            color="#4878a8", lw=1.0, label="training loss")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    val_rows = [r for r in history if r.val_auc is not None]
    if val_rows:
        ax2 = ax.twinx()
        ax2.plot([r.step for r in val_rows], [r.val_auc for r in val_rows],
                 color="#b85450", marker="o", ms=3, lw=1.0, label="validation AUC")
        ax2.set_ylabel("validation AUC")
        ax2.set_ylim(0.0, 1.05)
    ax.set_title("training loss / validation AUC")
    _footer(fig, fingerprint)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_auc_bars(report: EvalReport, path, fingerprint: str | None = None) -> None:
    """Grouped per-relation AUC bars for train/val/test, with the SNLP 0.76
    reference line for buys_from context."""
    rels = [r.value for r in RELATIONS
            if any(row.relation == r.value for row in report.rows)]
    fig, ax = plt.subplots(figsize=(8, 4))
    width = 0.26
    colors = {"train": "#85a8c8", "val": "#4878a8", "test": "#1f3f5f"}
    for j, split in enumerate(SPLIT_NAMES):
        xs, ys = [], []
        for i, rel in enumerate(rels):
            row = report.lookup(rel, split)
            if row is not None:
                xs.append(i + (j - 1) * width)
                ys.append(row.auc)
        ax.bar(xs, ys, width=width, color=colors[split], label=split)
    ax.axhline(SNLP_REFERENCE_AUC, color="#b85450", ls="--", lw=1.0,
               label=f"SNLP reference {SNLP_REFERENCE_AUC:.2f}")
    ax.set_xticks(range(len(rels)))
    ax.set_xticklabels(rels, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("AUC")
    ax.set_ylim(0.0, 1.05)
    ax.legend(fontsize=8)
    ax.set_title("per-relation link prediction AUC")
    _footer(fig, fingerprint)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
