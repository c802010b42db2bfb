"""Figures rendered to files next to the CSV/JSON outputs.

Uses the object-oriented matplotlib API (no pyplot state), so figures can be
drawn from worker threads.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

# fixed metadata keeps PNG bytes stable across runs
_PNG_META = {"Software": None}

_STYLE = {
    "gdm": dict(color="tab:green", ls="-"),
    "idm": dict(color="tab:blue", ls="-"),
    "edm": dict(color="tab:orange", ls="--"),
}


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    FigureCanvasAgg(fig)
    fmt = path.suffix.lstrip(".").lower() or "png"
    meta = _PNG_META if fmt == "png" else None
    fig.savefig(path, format=fmt, dpi=120, metadata=meta)
    return path


def plot_froc(curves: dict, path, fp_limit: float = 10.0, marks: dict | None = None, title=None) -> Path:
    """FROC curves, one line per label.

    ``curves`` maps label -> (fp_avg, sensitivity) arrays or a FrocCurve.
    ``marks`` maps label -> (fp_avg, sensitivity) operating points.
    """
    fig = Figure(figsize=(5.0, 3.8))
    ax = fig.add_subplot(111)
    for label, c in curves.items():
        if hasattr(c, "fp_avg"):
            fp, sens = c.fp_avg, c.sensitivity
            name = f"{label} (FAUC {c.fauc:.2f})"
        else:
            fp, sens = (np.asarray(v, dtype=float) for v in c)
            name = label
        fp = np.append(fp, max(fp_limit, fp[-1] if len(fp) else fp_limit))
        sens = np.append(sens, sens[-1] if len(sens) else 0.0)
        ax.plot(fp, sens, label=name, lw=1.5, **_STYLE.get(str(label).lower()[:3], {}))
        if marks and label in marks:
            mx, my = marks[label]
            ax.plot([mx], [my], marker="*", ms=9, color=ax.lines[-1].get_color(), ls="none")
    ax.set_xlim(0, fp_limit)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("FP$_{avg}$ per image")
    ax.set_ylabel("Sensitivity")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right", fontsize=8, frameon=False)
    fig.tight_layout()
    return _save(fig, path)


def plot_case(image, dots, panels: dict, path, detections: dict | None = None) -> Path:
    """Input image with its dots, followed by one panel per map.

    ``panels`` maps title -> 2D array; ``detections`` maps the same titles to
    lists of (y, x) drawn as stars.
    """
    n = 1 + len(panels)
    fig = Figure(figsize=(2.6 * n, 2.8))
    axes = [fig.add_subplot(1, n, i + 1) for i in range(n)]
    data = image.data if hasattr(image, "data") else image
    axes[0].imshow(data, cmap="gray", vmin=0, vmax=1, interpolation="nearest")
    pts = np.array(list(dots), dtype=float).reshape(-1, 2)
    axes[0].plot(pts[:, 1], pts[:, 0], "r+", ms=7)
    axes[0].set_title("image + dots", fontsize=9)
    for ax, (title, arr) in zip(axes[1:], panels.items()):
        ax.imshow(np.asarray(arr), cmap="viridis", interpolation="nearest")
        if detections and title in detections and len(detections[title]):
            d = np.array(detections[title], dtype=float).reshape(-1, 2)
            ax.plot(d[:, 1], d[:, 0], "*", color="tab:cyan", ms=6, ls="none")
        ax.plot(pts[:, 1], pts[:, 0], "r+", ms=7)
        ax.set_title(title, fontsize=9)
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    return _save(fig, path)
