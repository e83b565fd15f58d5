"""Input-side file contracts: trajectory CSV and metrics JSON.

The CSV contract is one header line followed by one row per (tick, agent):

    t,agent,px,py,vx,vy,ufx,ufy,usx,usy,min_h,rounds

The metrics JSON may carry an ``obstacles`` list of ``{id, pos, margin}``
objects describing the static obstacle layout; when absent, figures simply
omit the obstacle circles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_HEADER = "t,agent,px,py,vx,vy,ufx,ufy,usx,usy,min_h,rounds"
CSV_COLUMNS = CSV_HEADER.split(",")


class CsvFormatError(ValueError):
    """The CSV does not match the documented header/row contract."""


@dataclass(frozen=True)
class Obstacle:
    id: str
    x: float
    y: float
    margin: float


@dataclass(frozen=True)
class PlotJob:
    csv_path: Path
    metrics_path: Path | None
    out_dir: Path
    which: str  # "trajectory" | "controls" | "both"


@dataclass
class TrajectoryData:
    """Per-agent time series, each array shaped (ticks,)."""

    t: np.ndarray  # shared time axis, (ticks,)
    agents: list[int]
    px: dict[int, np.ndarray]
    py: dict[int, np.ndarray]
    usx: dict[int, np.ndarray]
    usy: dict[int, np.ndarray]

    @property
    def ticks(self) -> int:
        return self.t.shape[0]


def read_csv(path: Path) -> TrajectoryData:
    """Parse a trajectory CSV, validating header and row shape.

    Raises CsvFormatError naming the offending row when a row is truncated,
    over-long, or non-numeric, and when the header does not match.
    """
    try:
        text = path.read_text()
    except OSError as exc:
        raise CsvFormatError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise CsvFormatError(f"{path}: empty file, expected header '{CSV_HEADER}'")
    if lines[0] != CSV_HEADER:
        got = lines[0].split(",")
        missing = [c for c in CSV_COLUMNS if c not in got]
        if missing:
            raise CsvFormatError(
                f"{path}: header missing columns {missing} (got '{lines[0]}')"
            )
        raise CsvFormatError(
            f"{path}: header must be exactly '{CSV_HEADER}' (got '{lines[0]}')"
        )

    rows: list[list[float]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise CsvFormatError(
                f"{path}: row {lineno} has {len(parts)} fields, "
                f"expected {len(CSV_COLUMNS)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise CsvFormatError(f"{path}: row {lineno}: {exc}") from exc
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")

    data = np.array(rows)
    col = {name: data[:, k] for k, name in enumerate(CSV_COLUMNS)}
    agents = sorted({int(a) for a in col["agent"]})

    px: dict[int, np.ndarray] = {}
    py: dict[int, np.ndarray] = {}
    usx: dict[int, np.ndarray] = {}
    usy: dict[int, np.ndarray] = {}
    t_axis: np.ndarray | None = None
    for i in agents:
        mask = col["agent"].astype(int) == i
        t_i = col["t"][mask]
        if t_axis is None:
            t_axis = t_i
        elif t_i.shape != t_axis.shape or not np.array_equal(t_i, t_axis):
            raise CsvFormatError(
                f"{path}: agent {i} rows do not cover the same time axis "
                "as the other agents"
            )
        px[i] = col["px"][mask]
        py[i] = col["py"][mask]
        usx[i] = col["usx"][mask]
        usy[i] = col["usy"][mask]

    assert t_axis is not None
    return TrajectoryData(t=t_axis, agents=agents, px=px, py=py, usx=usx, usy=usy)


def read_obstacles(path: Path | None) -> list[Obstacle]:
    """Obstacle layout from the metrics JSON; empty when absent."""
    if path is None:
        return []
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CsvFormatError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CsvFormatError(f"{path}: invalid JSON: {exc}") from exc
    out = []
    for entry in doc.get("obstacles", []):
        out.append(
            Obstacle(
                id=str(entry["id"]),
                x=float(entry["pos"][0]),
                y=float(entry["pos"][1]),
                margin=float(entry["margin"]),
            )
        )
    return out
