"""Figure rendering for similarity reports.

Uses the Agg backend so figures render to files on headless machines.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import FileError

_SIMILARITY_FIELDS = ("zcr", "chroma", "spectral_contrast")


def similarity_figure(report, title: str = "similarity report"):
    """Bar chart of the three similarity scores plus the DTW distance."""
    fig, (ax_sim, ax_dtw) = plt.subplots(
        1, 2, figsize=(8.0, 3.2), width_ratios=(3, 1), constrained_layout=True
    )
    values = [getattr(report, name) for name in _SIMILARITY_FIELDS]
    ax_sim.bar(range(len(values)), values, color="tab:blue")
    ax_sim.set_xticks(range(len(values)), _SIMILARITY_FIELDS)
    ax_sim.set_ylim(-1.05, 1.05)
    ax_sim.axhline(0.0, color="black", linewidth=0.8)
    ax_sim.set_ylabel("similarity")
    ax_dtw.bar([0], [report.mfcc_dtw], color="tab:orange")
    ax_dtw.set_xticks([0], ["mfcc_dtw"])
    ax_dtw.set_ylabel("distance")
    fig.suptitle(title)
    return fig


def batch_figure(reports, labels=None):
    """Per-pair scores across a batch: similarities left, DTW right."""
    if labels is None:
        labels = [str(i) for i in range(len(reports))]
    x = np.arange(len(reports))
    fig, (ax_sim, ax_dtw) = plt.subplots(
        1, 2, figsize=(10.0, 3.6), width_ratios=(3, 2), constrained_layout=True
    )
    for name, marker in zip(_SIMILARITY_FIELDS, "o^s"):
        ax_sim.plot(x, [getattr(r, name) for r in reports], marker=marker, label=name)
    ax_sim.set_ylim(-1.05, 1.05)
    ax_sim.set_ylabel("similarity")
    ax_sim.set_xlabel("pair")
    ax_sim.legend(fontsize="small")
    ax_dtw.plot(x, [r.mfcc_dtw for r in reports], marker="o", color="tab:orange")
    ax_dtw.set_ylabel("mfcc_dtw distance")
    ax_dtw.set_xlabel("pair")
    if len(labels) <= 12:
        for ax in (ax_sim, ax_dtw):
            ax.set_xticks(x, labels, rotation=30, ha="right", fontsize="x-small")
    fig.suptitle(f"similarity across {len(reports)} pair(s)")
    return fig


def save_figure(fig, path, dpi: int = 150):
    try:
        fig.savefig(path, dpi=dpi)
    except OSError as exc:
        raise FileError(f"{path}: cannot write figure ({exc})") from None
    finally:
        plt.close(fig)
