"""Shared fixtures and the per-criterion acceptance summary."""
import numpy as np
import pytest

_ACCEPTANCE = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    _ACCEPTANCE.append((marker.args[0], rep.passed, rep.duration))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion covered by a test")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, duration in _ACCEPTANCE:
        flag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{flag}  {name}  ({duration:.2f} s)")
