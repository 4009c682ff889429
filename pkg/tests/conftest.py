import numpy as np
import pytest

from hardcore.geometry import Ball, square
from hardcore.model import Configuration, Grain

ACCEPTANCE_LINES = []


def record(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


def make_config(points, births=None, shape=None, window=((-50, -50), (50, 50))):
    shape = shape or Ball(1.0)
    births = births if births is not None else [0.0] * len(points)
    grains = [Grain(k, np.asarray(p, dtype=float), float(t), shape)
              for k, (p, t) in enumerate(zip(points, births))]
    return Configuration(grains, window, len(points[0]))


@pytest.fixture
def pair():
    return make_config([(0, 0), (10, 0)])


@pytest.fixture
def triple():
    return make_config([(0, 0), (10, 0), (24, 0)])


@pytest.fixture
def coverage():
    # the grain at the origin reaches (2, 0) at time 2, before that germ is born at 5
    return make_config([(0, 0), (2, 0)], births=[0.0, 5.0])


@pytest.fixture
def unit_square():
    return square(1.0)
