import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polarpms import synth
from polarpms.geometry import CameraView

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# (criterion, verdict, detail) rows filled in by test_acceptance
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")


# -- helpers -------------------------------------------------------------------------


def random_rotation(rng) -> np.ndarray:
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def small_rotation(rng, max_angle=0.2) -> np.ndarray:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    a = rng.uniform(-max_angle, max_angle)
    Kx = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(a) * Kx + (1 - math.cos(a)) * Kx @ Kx


def make_view(R=None, t=None, view_id=0, f=100.0, width=64, height=48) -> CameraView:
    R = np.eye(3) if R is None else R
    t = np.zeros(3) if t is None else t
    return CameraView(f, f, (width - 1) / 2, (height - 1) / 2, R, t, width, height, view_id)


def facing_normal(rng, ray) -> np.ndarray:
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    return -n if n @ ray > 0 else n


# -- shared scenes ---------------------------------------------------------------------


@pytest.fixture(scope="session")
def default_spec():
    return synth.default_scene()


@pytest.fixture(scope="session")
def default_render(default_spec):
    return synth.render(default_spec)

