import numpy as np
import pytest

from cbfs.dataset import DataMatrix, SampleClassification, generate_planted

from tests._report import LINES


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def three():
    """A = [[5,1],[1,5],[10,11]] with one sample per class."""
    A = DataMatrix.from_array([[5.0, 1.0], [1.0, 5.0], [10.0, 11.0]])
    return A, SampleClassification([0, 1], 2)


@pytest.fixture
def planted():
    d = generate_planted(12, 6, 3, signal=10.0, noise_features=0, seed=7)
    return d.matrix, d.labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
