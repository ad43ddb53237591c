"""Shared fixtures: bundled model files, synthetic trials, derived pipelines.

Expensive artifacts (the 10 s walker, its filtered CoM, the detected
timeline, the per-limb decomposition) are session-scoped so the whole
suite computes them once.  ``ACCEPTANCE_RESULTS`` collects one PASS/FAIL
line per acceptance test; the terminal-summary hook prints them at the
end of the run so the verdict survives in captured output.
"""

import numpy as np
import pytest

from gaitkinetics.anthro import bundled_table_path, load_table
from gaitkinetics.events import FootEvents, build_timeline, detect_events_zeni
from gaitkinetics.grf import decompose_gait, total_grf
from gaitkinetics.kinematics import (
    bundled_definitions_path,
    com_trajectory,
    filter_com_trajectory,
    load_segment_definitions,
)
from gaitkinetics.signal import UniformSeries, lowpass
from gaitkinetics.synth import (
    generate_static,
    generate_two_leg_forces,
    generate_walker,
)

CUTOFF_HZ = 5.0
FILTER_ORDER = 4

ACCEPTANCE_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    """Callable that records one acceptance verdict line for the summary."""

    def log(line: str) -> None:
        ACCEPTANCE_RESULTS.append(line)

    return log


def detect_timeline_from_markers(
    trial, cutoff_hz=CUTOFF_HZ, order=FILTER_ORDER, min_period_s=0.4
):
    """Detect events from marker data alone (same chain the CLI runs)."""
    traj = trial.markers
    rate = traj.sample_rate_hz

    def filtered_ap(name):
        return lowpass(UniformSeries(rate, traj.markers[name][:, 0]), cutoff_hz, order)

    sacrum = filtered_ap("SACR")
    events = {}
    for foot, heel, toe in (("left", "LHEE", "LTOE"), ("right", "RHEE", "RTOE")):
        hs, to = detect_events_zeni(
            filtered_ap(heel), filtered_ap(toe), sacrum, min_period_s
        )
        events[foot] = FootEvents(foot=foot, heel_strikes=hs, toe_offs=to)
    return build_timeline(events["left"], events["right"], traj.n_frames, rate)


@pytest.fixture(scope="session")
def table():
    return load_table(bundled_table_path())


@pytest.fixture(scope="session")
def definitions():
    return load_segment_definitions(bundled_definitions_path())


@pytest.fixture(scope="session")
def walker():
    return generate_walker()


@pytest.fixture(scope="session")
def static_trial():
    return generate_static()


@pytest.fixture(scope="session")
def walker_com_raw(walker, table, definitions):
    return com_trajectory(walker.markers, definitions, table, walker.subject)


@pytest.fixture(scope="session")
def walker_com(walker_com_raw):
    return filter_com_trajectory(walker_com_raw, CUTOFF_HZ, FILTER_ORDER)


@pytest.fixture(scope="session")
def walker_total(walker_com, walker):
    return total_grf(walker_com, walker.subject)


@pytest.fixture(scope="session")
def walker_timeline(walker):
    return detect_timeline_from_markers(walker)


@pytest.fixture(scope="session")
def walker_bilateral(walker_total, walker_timeline, walker):
    return decompose_gait(walker_total, walker_timeline, walker.subject.mass_kg)


@pytest.fixture(scope="session")
def two_leg():
    return generate_two_leg_forces()


def shift_markers(traj, delta):
    """Copy of a marker set with a constant 3-vector added to every sample."""
    delta = np.asarray(delta, dtype=float)
    markers = {name: pos + delta for name, pos in traj.markers.items()}
    missing = {name: mask.copy() for name, mask in traj.missing.items()}
    return type(traj)(
        sample_rate_hz=traj.sample_rate_hz, markers=markers, missing=missing
    )


def displace_markers_z(traj, dz):
    """Copy of a marker set with a per-frame vertical track added to all markers."""
    dz = np.asarray(dz, dtype=float)
    markers = {}
    for name, pos in traj.markers.items():
        moved = pos.copy()
        moved[:, 2] += dz
        markers[name] = moved
    missing = {name: mask.copy() for name, mask in traj.missing.items()}
    return type(traj)(
        sample_rate_hz=traj.sample_rate_hz, markers=markers, missing=missing
    )
