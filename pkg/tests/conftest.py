import numpy as np
import pytest

from isq import _kernels

BACKENDS = [pytest.param(_kernels.python, id="python")]
if _kernels.compiled is not None:
    BACKENDS.append(pytest.param(_kernels.compiled, id="cython"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
