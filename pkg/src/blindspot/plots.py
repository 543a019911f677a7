"""Report figures written to image files (matplotlib, non-interactive backend)."""

from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .vectors import RoseHistogram, VectorClass  # noqa: E402

_ALERT_Y = {"green": 0, "yellow": 1, "red": 2}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def rose_plot(hist: RoseHistogram, path, title: str = "flow directions") -> None:
    """Polar bars of object (green) and background (red) vector counts per angle bin."""
    fig = plt.figure(figsize=(5, 5))
    ax = fig.add_subplot(projection="polar")
    starts = np.array(hist.bin_starts())
    width = hist.bin_width
    ax.bar(starts, hist.background_counts, width=width, align="edge", color="tab:red", alpha=0.6, label="background")
    ax.bar(starts, hist.object_counts, width=width, align="edge", color="tab:green", alpha=0.8, label="object")
    ax.set_title(title)
    ax.legend(loc="lower left", fontsize="small")
    _save(fig, path)


def quiver_plot(frame, samples: Sequence, path, box=None, title: str = "flow vectors") -> None:
    h, w = frame.shape
    fig, ax = plt.subplots(figsize=(w / 60, h / 60))
    ax.imshow(frame.pixels, cmap="gray", vmin=0, vmax=1)
    for label, color in ((VectorClass.BACKGROUND, "tab:red"), (VectorClass.OBJECT, "tab:green")):
        pts = [c.sample for c in samples if c.label is label]
        if pts:
            ax.quiver(
                [p.x for p in pts], [p.y for p in pts], [p.u for p in pts], [-p.v for p in pts],
                color=color, angles="xy", scale_units="xy", scale=0.33, width=0.004,
            )
    if box is not None:
        x0, y0, x1, y1 = box.bounds()
        ax.add_patch(plt.Rectangle((x0, y0), x1 - x0, y1 - y0, fill=False, color="tab:blue", lw=2))
    ax.set_xlim(0, w - 1)
    ax.set_ylim(h - 1, 0)
    ax.set_title(title)
    _save(fig, path)


def ttc_profile_plot(profile, path, heading=None, title: str = "time to collision by column") -> None:
    vals = np.array([v if math.isfinite(v) else np.nan for v in profile.values])
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.bar(np.arange(len(vals)), vals, color="tab:orange")
    if heading is not None and heading.column is not None:
        ax.axvline(heading.column, color="tab:blue", ls="--", label=f"heading {heading.angle:+.3f} rad")
        ax.legend(fontsize="small")
    ax.set_xlabel("column")
    ax.set_ylabel("frames")
    ax.set_title(title)
    _save(fig, path)


def timeline_plot(records: Sequence, path, title: str = "detections") -> None:
    """Per processed frame: object ratio, box presence, circle count and final alert."""
    idx = [r.frame_index for r in records]
    ratio = [min(r.ratio, 1.0) for r in records]
    fig, axes = plt.subplots(3, 1, figsize=(7, 5), sharex=True)
    axes[0].plot(idx, ratio, marker=".", color="tab:green")
    axes[0].set_ylabel("object ratio")
    boxed = [i for i, r in zip(idx, records) if r.box is not None]
    axes[0].plot(boxed, [0.0] * len(boxed), "s", color="tab:blue", label="box")
    if boxed:
        axes[0].legend(fontsize="small")
    axes[1].bar(idx, [len(r.circles) for r in records], color="goldenrod")
    axes[1].set_ylabel("circles")
    colors = {"green": "tab:green", "yellow": "gold", "red": "tab:red"}
    axes[2].scatter(idx, [_ALERT_Y[r.alert.value] for r in records], c=[colors[r.alert.value] for r in records])
    axes[2].set_yticks([0, 1, 2], ["green", "yellow", "red"])
    axes[2].set_ylabel("alert")
    axes[2].set_xlabel("frame")
    axes[0].set_title(title)
    _save(fig, path)
