import numpy as np
import pytest
from hypothesis import settings

from curveflow.geometry import ShapeSpec, generate, init_from_points

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def unit_circle_100():
    return init_from_points(generate(ShapeSpec("circle", 100)))


@pytest.fixture
def ellipse_100():
    return init_from_points(generate(ShapeSpec("ellipse", 100, a=2.0, b=1.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion(request):
    """Record ``(ok, detail)`` for an acceptance criterion and print it."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
