"""Figure builders: trajectory plot and per-component filter-control plots.

Everything here is deterministic: fixed figure geometry, fixed per-agent
colors, no timestamps, so identical inputs produce identical image bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first

from .reader import Obstacle, TrajectoryData  # noqa: E402

# Tab10 cycles after 10 agents, which is fine for the formation sizes the
# simulator targets.
_CMAP = plt.get_cmap("tab10")


def _color(agent: int):
    return _CMAP(agent % 10)


def _save(fig, path: Path) -> None:
    # Strip metadata that could vary between environments so reruns stay
    # byte-identical.
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def plot_trajectory(
    data: TrajectoryData, obstacles: list[Obstacle], out_dir: Path
) -> Path:
    """Agent paths through the obstacle field; returns the written path."""
    fig, ax = plt.subplots(figsize=(8.0, 5.0))
    for obs in obstacles:
        circle = plt.Circle(
            (obs.x, obs.y), obs.margin, facecolor="0.85", edgecolor="0.3", zorder=1
        )
        ax.add_patch(circle)
        ax.annotate(obs.id, (obs.x, obs.y), ha="center", va="center",
                    fontsize=8, color="0.3", zorder=2)
    for i in data.agents:
        c = _color(i)
        ax.plot(data.px[i], data.py[i], color=c, lw=1.2, zorder=3,
                label=f"agent {i}")
        ax.plot(data.px[i][0], data.py[i][0], marker="o", color=c, ms=6, zorder=4)
        if data.ticks > 1:
            ax.plot(data.px[i][-1], data.py[i][-1], marker="s", color=c, ms=6,
                    zorder=4)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    ax.set_title("Formation trajectories (o start, □ end)")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, lw=0.3, alpha=0.5)
    path = out_dir / "trajectory.png"
    _save(fig, path)
    return path


def plot_controls(data: TrajectoryData, out_dir: Path) -> list[Path]:
    """One figure per component of the filter control u_s versus time."""
    written = []
    for comp, series in (("x", data.usx), ("y", data.usy)):
        fig, ax = plt.subplots(figsize=(8.0, 3.5))
        for i in data.agents:
            ax.plot(data.t, series[i], color=_color(i), lw=1.0,
                    label=f"agent {i}")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("control (m/s²)")
        ax.set_title(f"Safety-filter control, {comp}-component")
        ax.legend(loc="best", fontsize=8)
        ax.grid(True, lw=0.3, alpha=0.5)
        path = out_dir / f"controls_{comp}.png"
        _save(fig, path)
        written.append(path)
    return written
