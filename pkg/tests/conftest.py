from __future__ import annotations

import logging

import numpy as np
import pytest

from subdiffwr.problem import ControlProblem
from subdiffwr.spectral import decompose
from subdiffwr.timegrid import build_mesh
from subdiffwr.timeop import build_coupled


@pytest.fixture(autouse=True)
def _quiet_spectral_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="subdiffwr.spectral")


@pytest.fixture(scope="session")
def small_op():
    """Both-sided mesh, 40 intervals, alpha 0.5, sigma 1e-6."""
    return build_coupled(build_mesh("both_sided", 0.5, 1.0, 39), 1e-6)


@pytest.fixture(scope="session")
def small_sd(small_op):
    return decompose(small_op)


@pytest.fixture(scope="session")
def one_sided_op():
    return build_coupled(build_mesh("one_sided", 0.5, 1.0, 39), 1e-2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def problem_half():
    return ControlProblem(alpha=0.5)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
