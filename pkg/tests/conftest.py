import math

import numpy as np
import pytest

from sparselattice.baseline_dl import reduce_control_set_dl
from sparselattice.geometry import SampledPath
from sparselattice.lattice import ControlAction, ControlSet, LatticeConfig
from sparselattice.spiral import generate_dense_control_set


@pytest.fixture(scope="session")
def dense():
    return generate_dense_control_set()


@pytest.fixture(scope="session")
def dl(dense):
    return reduce_control_set_dl(dense, 1.1)


def straight_action(h, n, cfg, delta):
    """Straight action along lattice vector ``n`` steps of heading ``h`` (axis headings only)."""
    th = cfg.headings[h]
    vx, vy = round(math.cos(th)), round(math.sin(th))
    end = np.array([n * vx * cfg.dx, n * vy * cfg.dy])
    L = float(np.hypot(*end))
    m = int(round(L / delta))
    pts = np.linspace([0.0, 0.0], end, m + 1)
    return ControlAction(h, n * vx, n * vy, h, SampledPath(pts, delta), L)


def polyline_action(h, dix, diy, end_h, pts, delta):
    pts = np.asarray(pts, float)
    L = float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))
    return ControlAction(h, dix, diy, end_h, SampledPath(pts, delta), L)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
