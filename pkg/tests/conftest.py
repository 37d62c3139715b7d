import numpy as np
import pytest

from layerfield import (
    RobinProblem,
    TwoLayerProblem,
    cosine_trace,
    eigendecompose,
)


@pytest.fixture
def benchmark_problem():
    """Two-layer reference case: a1=1, a2=2, lambda1=1, lambda2=3, l=1,
    f = cos(y). kappa = 1.5, calibrated reflection coefficient 0.2."""
    return TwoLayerProblem(eigendecompose(1.0), eigendecompose(2.0),
                           1.0, 3.0, 1.0, cosine_trace(1.0, [1.0]))


@pytest.fixture
def scalar_robin_problem():
    """Robin reference case: a=1, h=-1, f = cos(y)."""
    return RobinProblem(eigendecompose(1.0), eigendecompose(-1.0),
                        cosine_trace(1.0, [1.0]))


def benchmark_layer1_closed_form(x, y):
    """Geometric summation of the image series for the benchmark case."""
    x = np.asarray(x, dtype=float)
    chi = 0.2
    q = chi * np.exp(-2.0)
    return (np.exp(-x) - chi * np.exp(-(2.0 - x))) / (1.0 - q) * np.cos(y)


def benchmark_layer2_closed_form(x, y):
    x = np.asarray(x, dtype=float)
    chi = 0.2
    q = chi * np.exp(-2.0)
    return (1.0 - chi) * np.exp(-(x - 1.0) / 2.0 - 1.0) / (1.0 - q) * np.cos(y)
