import numpy as np
import pytest

from ocms import ArrayGeometry, PressureRelease, SourceSpec, isovelocity, propagating_modes, synthesize, thermocline

DELTA_XI = 1e-4


@pytest.fixture(scope="session")
def iso_env():
    return isovelocity()


@pytest.fixture(scope="session")
def thermo_env():
    # 1530 -> 1500 m/s thermocline between 15 and 25 m; the band holds 11 modes
    return thermocline(bottom=PressureRelease(0.93))


@pytest.fixture(scope="session")
def thermo_modes(thermo_env):
    return propagating_modes(thermo_env)


@pytest.fixture(scope="session")
def full_array():
    return ArrayGeometry(np.arange(1.0, 51.0), 5000.0)


@pytest.fixture(scope="session")
def source():
    return SourceSpec(8.0, 5000.0)


@pytest.fixture(scope="session")
def clean_snapshot(thermo_modes, source, full_array, thermo_env):
    return synthesize(thermo_modes, source, full_array, thermo_env)


_ACCEPTANCE_LINES = []


def record_acceptance(line):
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
