"""SVG figures: t-SNE scatter and per-batch classifier bars."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "pdmsynth"
_SVG_META = {"Date": None, "Creator": None}


def tsne_svg(points: np.ndarray, origin: list[str], path) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    origin = np.asarray(origin)
    for name, color in (("real", "green"), ("synthetic", "red")):
        m = origin == name
        ax.scatter(points[m, 0], points[m, 1], s=8, c=color, alpha=0.6, label=name)
    ax.legend()
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)


def batches_svg(entries: list[dict], path) -> None:
    """One row per batch, bars of faulty-class precision/recall/F1 per target (seed means)."""
    batches = sorted({e["batch"] for e in entries})
    targets = sorted({e["target"] for e in entries})
    metrics = ("precision", "recall", "f1")
    fig, axes = plt.subplots(len(batches), 1, figsize=(6, 2.2 * len(batches)), squeeze=False)
    width = 0.8 / len(metrics)
    for ax, b in zip(axes[:, 0], batches):
        for k, m in enumerate(metrics):
            vals = [np.mean([e["classes"]["faulty"][m] for e in entries if e["batch"] == b and e["target"] == t])
                    for t in targets]
            ax.bar(np.arange(len(targets)) + k * width, vals, width, label=m)
        ax.set_ylim(0, 1.05)
        ax.set_xticks(np.arange(len(targets)) + width)
        ax.set_xticklabels([f"bearing {t}" for t in targets])
        ax.set_ylabel(f"batch {b}")
    axes[0, 0].legend(loc="upper right", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
