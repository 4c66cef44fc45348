import math
from pathlib import Path

import numpy as np
import pytest

from rvm1d import (
    BoundaryDataSpec,
    ExternalPotential,
    InitialDataSpec,
    PlasmaProfile,
    Profile,
    SimConfig,
    load_config,
    run_time_marching,
)

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def config(name: str) -> SimConfig:
    return load_config(CONFIGS / f"{name}.json")


def bump(amplitude=0.5, halfwidth=0.2):
    return PlasmaProfile.bump(amplitude, 0.5, halfwidth, 1.0)


def traveling_wave_config(nx=32, t_final=0.5):
    """E2 = B = F(x - t) with F linear; exact right-moving wave, k- = 0."""
    f_line = Profile.linear(1.0, 0.0)  # E2_0 = B_0 = x
    left = Profile.linear(-1.0, 0.0)  # F(-t)
    right = Profile.linear(-1.0, 1.0)  # F(1 - t)
    return SimConfig(
        nx=nx, nv=4, t_final=t_final, potential=ExternalPotential("none", enforce_blowup=False),
        initial_data=InitialDataSpec(E2_0=f_line, B_0=f_line),
        boundary_data=BoundaryDataSpec(left, right, left, right),
    )


def standing_wave_config(nx=32, t_final=1.0):
    """E2 = sin(pi x) sin(pi t), B = cos(pi x) cos(pi t): reflecting box, E2 = 0 at both ends."""
    return SimConfig(
        nx=nx, nv=4, t_final=t_final, potential=ExternalPotential("none", enforce_blowup=False),
        initial_data=InitialDataSpec(B_0=Profile.cosine([[1.0, math.pi, 0.0]])),
        boundary_data=BoundaryDataSpec(Profile.zero(), Profile.zero(),
                                       Profile.cosine([[1.0, math.pi, 0.0]]),
                                       Profile.cosine([[-1.0, math.pi, 0.0]])),
    )


@pytest.fixture(scope="session")
def confined_small():
    """Default confining potential, coarse grid, half unit of time."""
    cfg = config("confined_bump").replace(nx=32, nv=16, t_final=0.5)
    return run_time_marching(cfg)


@pytest.fixture(scope="session")
def confined_run():
    return run_time_marching(config("confined_bump"), snapshot_stride=8)


@pytest.fixture
def rng():
    return np.random.default_rng(20261019)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
