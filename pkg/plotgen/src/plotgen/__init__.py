"""Figure regeneration from simulator output files.

This package is a pure file-to-file transformation: it reads the trajectory
CSV and metrics JSON written by the simulator and emits static figures.  It
deliberately has no dependency on the simulator itself — the file formats are
the only interface.
"""

from .reader import CsvFormatError, PlotJob, TrajectoryData, read_csv, read_obstacles

__all__ = [
    "CsvFormatError",
    "PlotJob",
    "TrajectoryData",
    "read_csv",
    "read_obstacles",
]
