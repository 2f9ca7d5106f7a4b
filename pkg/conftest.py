"""Shared pytest fixtures and configurations for the test suite."""

import numpy as np
import pytest

from ppikit.classes import Dataset, PredictionSet
from ppikit.establishing import create_logger

FOUR_ROWS = """id,x1,y,s,yhat
1,0.5,1,1,2
2,1.5,3,1,2
3,2.5,,0,4
4,3.5,,0,6
"""


@pytest.fixture(scope="session", autouse=True)
def test_log(tmp_path_factory):
    log_file = tmp_path_factory.mktemp("log") / "ppikit.log"
    create_logger(log_file)
    return log_file


@pytest.fixture
def four_rows_csv(tmp_path):
    path = tmp_path / "four_rows.csv"
    path.write_text(FOUR_ROWS, encoding="utf-8")
    return path


@pytest.fixture
def four_rows():
    dataset = Dataset([0.5, 1.5, 2.5, 3.5], [1, 3, np.nan, np.nan], [1, 1, 0, 0],
                      row_id=[1, 2, 3, 4])
    return dataset, PredictionSet([2, 2, 4, 6])


@pytest.fixture(scope="session")
def make_data():
    """Factory of random linear datasets with informative predictions."""
    def _make(seed, n=400, p=2, pi=0.3, noise=1.0, pred_noise=0.5):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((n, p))
        y = 1.0 + X @ np.linspace(1, -1, p) + noise * rng.standard_normal(n)
        labels = np.zeros(n, dtype=int)
        labels[rng.permutation(n)[:max(3, int(round(pi * n)))]] = 1
        yhat = y + pred_noise * rng.standard_normal(n)
        return Dataset(X, y, labels), PredictionSet(yhat)
    return _make
