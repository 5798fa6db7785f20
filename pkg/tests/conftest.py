import numpy as np
import pytest

from anchorloc import edm_from_points, mds_frame
from anchorloc.synth import EXAMPLE1_ANCHORS, EXAMPLE1_SOURCE


def sqdist_loop(P, Q):
    """Independent squared-distance oracle (plain loops)."""
    out = np.zeros((len(P), len(Q)))
    for i, p in enumerate(P):
        for j, q in enumerate(Q):
            out[i, j] = sum((float(a) - float(b)) ** 2 for a, b in zip(p, q))
    return out


def random_frame(rng, m=6, r=2, scale=1.0):
    anchors = rng.normal(scale=scale, size=(m, r))
    return mds_frame(edm_from_points(anchors), anchors), anchors


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def example1():
    anchors = EXAMPLE1_ANCHORS
    return mds_frame(edm_from_points(anchors), anchors), anchors, EXAMPLE1_SOURCE


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in REPORT:
            terminalreporter.write_line(line)
