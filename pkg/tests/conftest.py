import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "thorough", max_examples=1000, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("thorough")

# acceptance lines and property-suite outcomes collected during the session
ACCEPTANCE = {}
PROPERTY_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "property: randomized invariant suite (criterion 10)")
    config.addinivalue_line("markers", "acceptance: numbered acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "property" in report.keywords:
        prev = PROPERTY_OUTCOMES.get(report.nodeid, True)
        PROPERTY_OUTCOMES[report.nodeid] = prev and report.outcome == "passed"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE and not PROPERTY_OUTCOMES:
        return
    if PROPERTY_OUTCOMES:
        bad = [k for k, ok in PROPERTY_OUTCOMES.items() if not ok]
        ACCEPTANCE[10] = (not bad, f"{len(PROPERTY_OUTCOMES) - len(bad)}/{len(PROPERTY_OUTCOMES)} "
                                   f"property tests passed" + (f"; failing: {bad}" if bad else ""))
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        tr.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record():
    """``record(k, ok, detail)`` stores the outcome line for acceptance criterion k."""
    def _record(k, ok, detail):
        ACCEPTANCE[k] = (bool(ok), detail)
        return ok
    return _record
