import math

import numpy as np
import pytest
from hypothesis import settings

from sandstone.circles import GenCircle

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def tangent_triple(r1, r2, r3, angle=0.0, shift=(0.0, 0.0)):
    """Three pairwise externally tangent circles, placed by the law of cosines."""
    a, b, c = r1 + r2, r1 + r3, r2 + r3
    x = (a * a + b * b - c * c) / (2 * a)
    y = math.sqrt(max(b * b - x * x, 0.0))
    rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    pts = [np.zeros(2), np.array([a, 0.0]), np.array([x, y])]
    pts = [rot @ p + np.asarray(shift) for p in pts]
    return [GenCircle.circle(p, r) for p, r in zip(pts, (r1, r2, r3))]


def random_triple(rng, spread=1.0):
    r = np.exp(rng.uniform(-spread, spread, 3))
    return tangent_triple(*r, angle=rng.uniform(0, 2 * math.pi), shift=rng.uniform(-3, 3, 2))


def descartes_inner(k1, k2, k3):
    return k1 + k2 + k3 + 2 * math.sqrt(k1 * k2 + k2 * k3 + k3 * k1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE: dict = {}


@pytest.fixture
def accept():
    """Record one acceptance line: ``accept(number, title, ok, detail)``."""

    def record(number, title, ok, detail=""):
        ACCEPTANCE[number] = (title, bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}: {detail}")
