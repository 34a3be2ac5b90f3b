import numpy as np
import pytest

from betascan.content import PointSample
from betascan.datasets import gen_synthetic


@pytest.fixture(scope="session")
def corner_sample():
    s, t = gen_synthetic("corner", {}, h=2e-4)
    return s, t


@pytest.fixture(scope="session")
def circle_sample():
    s, t = gen_synthetic("circle", {}, h=1e-3)
    return s, t


@pytest.fixture(scope="session")
def cantor6_sample():
    s, t = gen_synthetic("cantor4", {"generation": 6}, h=4.0**-6)
    return s, t


@pytest.fixture(scope="session")
def line_sample():
    s, t = gen_synthetic("graph", {"function": "linear", "coeff": 0.0}, h=1e-3)
    return s, t


def make_graph(f, h, half=1.0):
    """Uniform-in-x graph sample used by fixtures that need custom functions."""
    x = np.arange(-half, half + h / 2, h)
    return PointSample(np.stack([x, f(x)], axis=1), 1, resolution_h=h * 2)
