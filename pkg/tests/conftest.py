import math
import sys

import numpy as np
import pytest

from patspec import (
    DIRICHLET,
    DampingSchedule,
    Robin,
    TimeGrid,
    assemble,
    build_interval,
    compute_basis,
    sample_speed,
)

A1_SPEED = "sine:amp=0.5,base=1.0"
A1_CELLS = 400
A1_MODES = 10


class Setup:
    """Grid, speed, operators and both bases for one configuration."""

    def __init__(self, grid, speed, alpha=1.0, num_modes=A1_MODES):
        self.grid = grid
        self.speed = speed
        self.op_r = assemble(grid, speed, Robin(alpha))
        self.op_d = assemble(grid, speed, DIRICHLET)
        self.robin = compute_basis(self.op_r, num_modes)
        self.dirichlet = compute_basis(self.op_d, num_modes)

    def timegrid(self, sched=None):
        sched = sched or DampingSchedule()
        lam_max = max(self.robin.lam.max(), self.dirichlet.lam.max())
        return TimeGrid.covering(lam_max, sched.max_horizon)


def interval_setup(speed=A1_SPEED, cells=A1_CELLS, alpha=1.0, num_modes=A1_MODES):
    grid = build_interval(math.pi, cells)
    return Setup(grid, sample_speed(grid, speed), alpha, num_modes)


@pytest.fixture(scope="session")
def a1():
    return interval_setup()


@pytest.fixture(scope="session")
def unit_speed():
    return interval_setup(speed="constant:1.0")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
