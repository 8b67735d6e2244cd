import pytest

from helpers import ALPHA04, ALPHA075, STABLE05, build
from semistable_renewal.density import DensityEvaluator


@pytest.fixture(scope="session")
def case075():
    d, spec, scheme = build(ALPHA075)
    return d, spec, scheme, DensityEvaluator(spec)


@pytest.fixture(scope="session")
def case04():
    d, spec, scheme = build(ALPHA04)
    return d, spec, scheme, DensityEvaluator(spec)


@pytest.fixture(scope="session")
def stable05():
    d, spec, scheme = build(STABLE05)
    return d, spec, scheme, DensityEvaluator(spec)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
