"""Static figures: protocol layouts and evacuation-time curves."""
from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .protocols import Protocol, Rendezvous  # noqa: E402

DEFAULT_SCALE = 400.0  # pixels per unit length
_DPI = 72.0  # SVG user units are points, so 72 dpi keeps 1 px = 1 unit

STYLE = {
    "font.size": 9,
    "font.family": "sans-serif",
    "axes.linewidth": 0.8,
    "lines.linewidth": 1.4,
    "legend.frameon": False,
    "legend.fontsize": 8,
    "svg.fonttype": "none",
    "svg.hashsalt": "evacsim",  # stable ids, so identical inputs give identical files
}

ROBOT_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
                "#e377c2", "#17becf")


@contextmanager
def style():
    with matplotlib.rc_context(STYLE):
        yield


def _robot_color(i: int) -> str:
    return ROBOT_COLORS[i % len(ROBOT_COLORS)]


def protocol_figure(protocol: Protocol, worst_exits: Iterable[float] = (),
                    scale: float = DEFAULT_SCALE, margin: float = 0.12):
    """Shape outline, one polyline per robot, interior waypoints and worst exits."""
    shape = protocol.shape
    verts = np.asarray(shape.vertices)
    lo = verts.min(axis=0) - margin
    hi = verts.max(axis=0) + margin
    lo[1] -= 0.1  # room for the legend strip
    size = (hi - lo) * scale / _DPI
    fig = plt.figure(figsize=tuple(size), dpi=_DPI)
    ax = fig.add_axes((0.0, 0.0, 1.0, 1.0))
    ax.set_xlim(lo[0], hi[0])
    ax.set_ylim(lo[1], hi[1])
    ax.set_aspect("equal")
    ax.axis("off")

    outline = np.vstack([verts, verts[:1]])
    ax.plot(outline[:, 0], outline[:, 1], color="0.2", lw=1.0)
    for lab, v in zip(shape.labels, verts):
        off = (v - np.asarray(shape.centroid)) * 0.12
        ax.annotate(lab, v + off, ha="center", va="center")
    ax.plot(*shape.centroid, marker="o", color="0.2", ms=3)

    for i, traj in enumerate(protocol.trajectories):
        pts = np.asarray(traj.points)
        # small offset so coincident strokes stay distinguishable
        jitter = 0.004 * (i - (protocol.k - 1) / 2.0)
        ax.plot(pts[:, 0] + jitter, pts[:, 1] + jitter, color=_robot_color(i),
                label=f"robot {i}", alpha=0.85)
        inner = [p for p in traj.points[1:-1] if not shape.on_boundary(p)]
        if inner:
            q = np.asarray(inner)
            ax.plot(q[:, 0], q[:, 1], ls="none", marker=".", color=_robot_color(i), ms=5)

    if isinstance(protocol.policy, Rendezvous):
        ax.plot(*protocol.policy.meeting_point, marker="s", color="k", ms=4, ls="none",
                label="meeting point")
    cs = protocol.common_section
    if cs is not None:
        seg = np.asarray([shape.boundary_point(cs.start), shape.boundary_point(cs.end)])
        ax.plot(seg[:, 0], seg[:, 1], color="0.5", lw=4, alpha=0.5, label="common section")

    worst = list(worst_exits)
    if worst:
        w = shape.boundary_points(np.asarray(worst))
        ax.plot(w[:, 0], w[:, 1], ls="none", marker="x", color="k", ms=8, mew=1.6,
                label="worst exits")
    ax.legend(loc="lower center", ncol=5, handlelength=1.5, columnspacing=1.0)
    return fig


def curve_figure(curve: np.ndarray, breakpoints: Optional[Iterable[float]] = None,
                 worst_time: Optional[float] = None, lower_bound: Optional[float] = None):
    """Evacuation time against exit arc length."""
    fig, ax = plt.subplots(figsize=(6.4, 3.2))
    order = np.argsort(curve[:, 0], kind="stable")
    ax.plot(curve[order, 0], curve[order, 1], color=_robot_color(0), lw=1.0)
    for b in breakpoints or ():
        ax.axvline(b, color="0.8", lw=0.6, zorder=0)
    if worst_time is not None:
        ax.axhline(worst_time, color="k", ls="--", lw=0.8, label=f"worst {worst_time:.5f}")
    if lower_bound is not None:
        ax.axhline(lower_bound, color="0.5", ls=":", lw=0.8, label=f"lower bound {lower_bound:.4f}")
    ax.set_xlabel("exit position (arc length)")
    ax.set_ylabel("evacuation time")
    if worst_time is not None or lower_bound is not None:
        ax.legend(loc="lower right")
    fig.tight_layout()
    return fig


def save(fig, path: str) -> None:
    fig.savefig(path, metadata={"Date": None} if str(path).endswith(".svg") else None)
    plt.close(fig)
