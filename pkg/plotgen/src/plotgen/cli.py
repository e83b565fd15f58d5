"""Command-line entry point: `plotgen --csv ... --metrics ... --out ...`.

Exit codes: 0 on success, 2 when an input file is missing or violates the
documented CSV/JSON contracts.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import plot_controls, plot_trajectory
from .reader import CsvFormatError, PlotJob, read_csv, read_obstacles

EXIT_OK = 0
EXIT_FORMAT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotgen",
        description="Regenerate trajectory and control-signal figures "
        "from simulator output files",
    )
    parser.add_argument("--csv", required=True, help="trajectory CSV path")
    parser.add_argument("--metrics", help="metrics JSON path (obstacle layout)")
    parser.add_argument("--out", required=True, help="output directory for figures")
    parser.add_argument(
        "--which",
        choices=["trajectory", "controls", "both"],
        default="both",
        help="which figures to produce (default: both)",
    )
    return parser


def run_job(job: PlotJob) -> list[Path]:
    data = read_csv(job.csv_path)
    job.out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    if job.which in ("trajectory", "both"):
        obstacles = read_obstacles(job.metrics_path)
        written.append(plot_trajectory(data, obstacles, job.out_dir))
    if job.which in ("controls", "both"):
        written.extend(plot_controls(data, job.out_dir))
    return written


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = PlotJob(
        csv_path=Path(args.csv),
        metrics_path=Path(args.metrics) if args.metrics else None,
        out_dir=Path(args.out),
        which=args.which,
    )
    try:
        written = run_job(job)
    except CsvFormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
