"""Figure rendering for the report-producing commands.

Every renderer writes a PNG next to the delimited output it illustrates;
rendering is optional and never alters the data files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _finish(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_cloud(points: np.ndarray, path: str, title: str = "attractor cloud") -> str:
    pts = np.atleast_2d(points)
    fig, ax = plt.subplots(figsize=(6, 6))
    if pts.shape[1] == 1:
        ax.hist(pts[:, 0], bins=200, color="#30507a")
        ax.set_xlabel("c")
    else:
        ax.scatter(pts[:, 0], pts[:, 1], s=0.3, c="#30507a", alpha=0.25, linewidths=0)
        ax.set_xlabel("c1")
        ax.set_ylabel("c2")
        ax.set_aspect("equal")
    ax.set_title(title)
    return _finish(fig, path)


def render_boxes(
    centers: np.ndarray, resolution: float, path: str, title: str = "box cover"
) -> str:
    pts = np.atleast_2d(centers)
    fig, ax = plt.subplots(figsize=(6, 6))
    if pts.shape[1] == 1:
        ax.eventplot(pts[:, 0], colors="#7a3030")
        ax.set_xlabel("c")
    else:
        size = max(0.2, 72.0 * resolution)
        ax.scatter(
            pts[:, 0], pts[:, 1], s=size, c="#7a3030", marker="s", linewidths=0
        )
        ax.set_xlabel("c1")
        ax.set_ylabel("c2")
        ax.set_aspect("equal")
    ax.set_title(f"{title} (side {resolution:.4g})")
    return _finish(fig, path)


def render_histogram(
    edges: np.ndarray, density: np.ndarray, path: str, title: str = "occupation"
) -> str:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.stairs(density, edges, fill=True, color="#3d7a46")
    ax.set_xlabel("value")
    ax.set_ylabel("density")
    ax.set_title(title)
    return _finish(fig, path)


def render_report(reports, path: str) -> str:
    """Bar chart of statistic vs threshold per check (log scale)."""
    names = [r.name for r in reports]
    stats = np.array([max(r.statistic, 1e-12) for r in reports])
    thresholds = np.array([max(abs(r.threshold), 1e-12) for r in reports])
    colors = ["#3d7a46" if r.verdict == "pass" else "#a33a3a" for r in reports]
    y = np.arange(len(names))
    fig, ax = plt.subplots(figsize=(8, 0.5 * len(names) + 1.5))
    ax.barh(y, stats, color=colors)
    ax.scatter(thresholds, y, marker="|", s=200, c="black", label="threshold")
    ax.set_yticks(y, names)
    ax.set_xscale("log")
    ax.set_xlabel("statistic (bar) vs threshold (tick)")
    ax.legend(loc="lower right")
    return _finish(fig, path)
