import numpy as np
import pytest

from phefl.model import Dataset, ModelSpec, init_params

ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    def record(name, passed, detail=""):
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"{status}  {name}  {detail}".rstrip())
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_spec():
    return ModelSpec(5, (7,), 4)


@pytest.fixture
def small_batch():
    rng = np.random.default_rng(3)
    return Dataset(rng.uniform(size=(12, 5)), rng.integers(0, 4, size=12))


@pytest.fixture
def small_params(small_spec):
    return init_params(small_spec, 11)
