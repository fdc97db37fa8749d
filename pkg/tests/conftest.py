import numpy as np
import pytest

from parampen.registry import load_problem
from parampen.singular import SingularConfig, identity_growth, singular_penalty


@pytest.fixture
def lianzhang():
    return load_problem("lianzhang-1d")


@pytest.fixture
def linear_cfg():
    return SingularConfig(identity_growth(), identity_growth())


@pytest.fixture
def lz_singular(lianzhang, linear_cfg):
    return singular_penalty(lianzhang, linear_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_runtest_logreport(report):
    if report.when == "call":
        for key, line in report.user_properties:
            if key == "acceptance":
                _ACCEPTANCE.append(line)


_ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
