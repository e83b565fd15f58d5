"""End-to-end figure regeneration from a real simulator run.

The simulator is driven through its command-line interface only, so this
test exercises exactly the file contracts that separate the two packages.
"""

import shutil
import subprocess

import pytest

from plotgen import cli


def criterion(number: int, passed: bool, detail: str) -> None:
    flag = "PASS" if passed else "FAIL"
    print(f"CRITERION {number}: {flag} - {detail}")
    assert passed, f"criterion {number}: {detail}"


@pytest.fixture(scope="session")
def reference_outputs(tmp_path_factory):
    if shutil.which("swarmsafe") is None:
        pytest.skip("simulator CLI not installed")
    out = tmp_path_factory.mktemp("refrun")
    ref = subprocess.run(
        ["swarmsafe", "reference"], capture_output=True, text=True, check=True
    ).stdout.strip()
    subprocess.run(
        ["swarmsafe", "run", ref, "--out", str(out)],
        capture_output=True, text=True, check=True, timeout=300,
    )
    return out


def test_criterion_9_figure_regeneration(reference_outputs, tmp_path):
    out = tmp_path / "figs"
    code = cli.main(
        [
            "--csv", str(reference_outputs / "trajectory.csv"),
            "--metrics", str(reference_outputs / "metrics.json"),
            "--out", str(out),
            "--which", "both",
        ]
    )
    traj = out / "trajectory.png"
    controls = [out / "controls_x.png", out / "controls_y.png"]
    traj_ok = traj.exists() and traj.stat().st_size > 10_000
    controls_ok = all(p.exists() and p.stat().st_size > 0 for p in controls)
    ok = code == 0 and traj_ok and controls_ok
    sizes = ", ".join(
        f"{p.name} {p.stat().st_size} B" for p in [traj, *controls] if p.exists()
    )
    criterion(
        9,
        ok,
        f"trajectory figure > 10 KB and two control figures non-empty "
        f"from CSV/JSON contracts alone ({sizes})",
    )
