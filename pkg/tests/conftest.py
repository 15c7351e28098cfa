import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def box_for_ratio(nu, M, K=1):
    """Box centred at 0 whose cells give ``pi M r_c = nu`` at unit period."""
    from kpme.geometry import Box3

    return Box3((0.0, 0.0, 0.0), nu * K / (math.pi * M))


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool | None, detail: str) -> None:
    """Store the one-line verdict printed after the run; ``None`` marks not reproducible."""
    tag = {True: "PASS", False: "FAIL", None: "N/A "}[passed]
    ACCEPTANCE_LINES[number] = f"[{tag}] criterion {number}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
