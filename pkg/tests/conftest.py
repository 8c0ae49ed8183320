import warnings

import numpy as np
import pytest

from upe.cdf_model import NumericalUnderflowWarning
from upe.data import Dataset


def linear_normal(n, seed, gamma=1.0, mu_x=0.0, sigma_x=1.0):
    rng = np.random.default_rng(seed)
    x = mu_x + sigma_x * rng.standard_normal(n)
    y = gamma * x + rng.standard_normal(n)
    return Dataset(y=y, x=x, w=np.empty((n, 0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_clipping():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NumericalUnderflowWarning)
        yield


_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion and return the flag."""

    def record(label: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
