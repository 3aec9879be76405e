import numpy as np
import pytest
from hypothesis import settings

from hhtshm.frame import LINEAR, ShearFrameModel, calibrate

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

TARGET_F1 = 1.0696
TARGET_SHAPE = np.array([0.2964, 0.7037, 1.0])
MASSES = (8000.0, 8000.0, 8000.0)


@pytest.fixture(scope="session")
def calibrated_k():
    return calibrate(TARGET_F1, TARGET_SHAPE, MASSES)


@pytest.fixture(scope="session")
def calibrated_model(calibrated_k):
    return ShearFrameModel(MASSES, tuple(calibrated_k), LINEAR)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, passed: bool, detail: str) -> str:
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
