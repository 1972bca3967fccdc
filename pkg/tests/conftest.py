import time

import pytest

from roiedca.experiment import run_experiment
from roiedca.scenario import load_scenario, reference_scenario_path
from roiedca.traffic import Region, VideoTraceEntry


class FixedDraws:
    """Stand-in for RngStream that replays scripted uniforms."""

    def __init__(self, *values):
        self.values = list(values)
        self.draws = 0

    def uniform(self):
        self.draws += 1
        return self.values.pop(0)

    def randint(self, lo, hi):
        return lo + int(self.uniform() * (hi - lo + 1))


def small_trace(frames=4, roi_size=3000, non_size=2000, enc_roi=20.0, enc_non=40.0,
                motion_roi=50.0, motion_non=5.0, roi_px=100, non_px=300):
    out = []
    for f in range(frames):
        out.append(VideoTraceEntry(f, Region.ROI, roi_size, enc_roi, motion_roi, roi_px))
        out.append(VideoTraceEntry(f, Region.NONROI, non_size, enc_non, motion_non, non_px))
    return out


@pytest.fixture(scope="session")
def reference_scenario():
    return load_scenario(reference_scenario_path())


@pytest.fixture(scope="session")
def reference_sweep(reference_scenario):
    t0 = time.perf_counter()
    records = run_experiment(reference_scenario)
    return records, time.perf_counter() - t0


@pytest.fixture(scope="session")
def reference_records(reference_sweep):
    return reference_sweep[0]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda ln: int(ln.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
