import numpy as np
import pytest

from qfhpo import toy_models as tm
from qfhpo.encoding import DimensionSpec, SearchSpace
from qfhpo.pipeline import Objective


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def stumps_space():
    # 10 x 5 x 2 = 100 lattice points
    return SearchSpace((
        DimensionSpec("learning_rate", "discrete", 0.05, 0.5, 0.05),
        DimensionSpec("max_iter", "discrete", 10, 50, step=10),
        DimensionSpec("loss", "categorical", categories=("squared_error", "absolute_error")),
    ))


@pytest.fixture
def stumps_objective():
    return Objective("boosted_stumps", lambda: tm.friedman_dataset(300, seed=0), seed=0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
