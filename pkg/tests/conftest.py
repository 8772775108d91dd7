"""Shared fixtures. Frame synthesis and CAFs are the slow parts, so the
expensive objects are built once per session. The acceptance tests register
one verdict line each; the terminal summary prints them after the run."""

import numpy as np
import pytest

from multiscout import (
    DopplerGrid,
    LinkBudget,
    WaveformConfig,
    compute_caf,
    default_scene,
    make_frame,
    synthesize_capture,
)


ACCEPTANCE_LINES: list = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    """Collect one pass/fail line per acceptance criterion."""
    verdict = "PASS" if passed else "FAIL"
    line = f"criterion {number} [{verdict}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def record():
    return record_criterion


@pytest.fixture(scope="session")
def frame128():
    """Full-length reference frame (128 symbols, 140368 samples)."""
    return make_frame(WaveformConfig())


@pytest.fixture(scope="session")
def frame16():
    """Short frame for tests that only need the structure, not the SNR."""
    return make_frame(WaveformConfig(num_symbols=16))


@pytest.fixture(scope="session")
def single_scene():
    return default_scene("single")


@pytest.fixture(scope="session")
def multi_scene():
    return default_scene("multi")


@pytest.fixture(scope="session")
def single_rd_maps(frame128, single_scene):
    """Range-Doppler maps of the reference single-target scene, one per receiver."""
    grid = DopplerGrid(400.0, 401)
    budget = LinkBudget()
    maps = []
    for m in range(len(single_scene.receivers)):
        cap = synthesize_capture(frame128, single_scene, m, budget, phase_seed=123)
        maps.append(compute_caf(cap, frame128, 80, grid))
    return maps
