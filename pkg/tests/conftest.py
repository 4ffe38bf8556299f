"""Shared states and helpers for the test suite."""

import numpy as np
import pytest

from nolawbohm.dirac import DiracPacket, MultiTimeWaveFunction
from nolawbohm.ensemble import EnsembleRun


@pytest.fixture(scope="session")
def single_packet():
    """One particle, one packet at rest."""
    return MultiTimeWaveFunction.from_packets([(1.0, (DiracPacket(0.0, 0.0, 1.0),))])


@pytest.fixture(scope="session")
def moving_packet():
    return MultiTimeWaveFunction.from_packets([(1.0, (DiracPacket(0.0, 0.3, 1.0),))])


@pytest.fixture(scope="session")
def entangled():
    """Two particles whose left- and right-moving branches are paired."""
    p = DiracPacket
    return MultiTimeWaveFunction.from_packets(
        [(1.0, (p(0.0, 0.5, 1.0), p(3.0, 0.5, 1.0))), (1.0, (p(0.0, -0.5, 1.0), p(3.0, -0.5, 1.0)))]
    )


def synthetic_run(points, label="F", valid=None):
    """EnsembleRun built directly from world lines (M, K, N, 2)."""
    points = np.asarray(points, dtype=float)
    m, k = points.shape[:2]
    valid = np.ones(m, dtype=bool) if valid is None else np.asarray(valid)
    return EnsembleRun("psi", label, np.arange(k, dtype=float), points, valid, m, 0)


def straight_lines(x0, velocity, t0=-1.0, t1=3.0, k=9):
    """World lines x = x0 + velocity * t of one particle, shape (M, K, 1, 2)."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    v = np.broadcast_to(np.asarray(velocity, dtype=float), x0.shape)
    t = np.linspace(t0, t1, k)
    pts = np.empty((len(x0), k, 1, 2))
    pts[..., 0, 0] = t
    pts[..., 0, 1] = x0[:, None] + v[:, None] * t
    return pts


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
