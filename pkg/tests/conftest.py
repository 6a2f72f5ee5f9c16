import numpy as np
import pytest

from fedmask.data import Dataset, generate_blobs
from fedmask.params import ParamSet


def finite_difference_grad(loss_fn, params: ParamSet, eps: float = 1e-5) -> dict:
    """Central differences of ``loss_fn(ParamSet)`` w.r.t. every entry."""
    out = {}
    for name in params:
        g = np.zeros_like(params[name])
        for idx in np.ndindex(g.shape):
            plus = params.copy_arrays()
            plus[name][idx] += eps
            minus = params.copy_arrays()
            minus[name][idx] -= eps
            g[idx] = (loss_fn(ParamSet(plus)) - loss_fn(ParamSet(minus))) / (2 * eps)
        out[name] = g
    return out


def max_relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float((np.abs(a - b) / denom).max())


@pytest.fixture
def blobs() -> Dataset:
    return generate_blobs(200, 5, 3, spread=0.5, seed=11)


@pytest.fixture
def tiny_params() -> ParamSet:
    return ParamSet([("W", [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]), ("b", [[0.5, -0.5, 0.0, 1.0]])])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
