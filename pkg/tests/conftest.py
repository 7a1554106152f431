import numpy as np
import pytest

from mistake_pressure import AdditivePotential, MatrixCocycle, full_shift, golden_mean_shift

# acceptance criterion -> (ok, detail); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture
def fs():
    return full_shift(2)


@pytest.fixture
def gm():
    return golden_mean_shift()


@pytest.fixture
def zero():
    return AdditivePotential.zero(2)


@pytest.fixture
def logw():
    return AdditivePotential.log_weights([2.0, 3.0])


@pytest.fixture
def diag():
    return MatrixCocycle([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
