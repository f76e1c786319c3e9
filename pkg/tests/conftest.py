import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mcv2x.analytic import AnalyticModel, QuadratureSpec  # noqa: E402
from mcv2x.channel import NetworkParams  # noqa: E402


@pytest.fixture
def params():
    return NetworkParams()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def quad():
    return QuadratureSpec()


@pytest.fixture
def model(params):
    return AnalyticModel.from_params(params, m=1)


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0].rstrip("abc"))):
            terminalreporter.write_line(line)
