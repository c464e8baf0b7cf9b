import math

import numpy as np
import pytest

from hygrofem.appio import demo_material
from hygrofem.domain import LayerRect, build_domain, triangulate


@pytest.fixture(scope="session")
def kunzel_brick():
    return demo_material("kunzel_brick")


@pytest.fixture(scope="session")
def kunzel_insulation():
    return demo_material("kunzel_insulation")


@pytest.fixture(scope="session")
def kiessl_brick():
    return demo_material("kiessl_brick")


@pytest.fixture
def two_layer_mesh():
    dom = build_domain([LayerRect(0, 0, 0.5, 1, name="a"), LayerRect(0.5, 0, 1, 1, name="b")])
    return triangulate(dom, 0.125)


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


PI = math.pi


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and echo it."""

    def record(n, ok, detail=""):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
