import numpy as np
import pytest

from zomgt.datasets import bundled_a9a_path
from zomgt.problem import load_libsvm

ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture(scope="session")
def a9a():
    return load_libsvm(bundled_a9a_path(), dim=123)


@pytest.fixture(scope="session")
def a9a_4000(a9a):
    return a9a.head(4000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
