import numpy as np
import pytest

from tempbell.geometry import Config, Direction

_acceptance = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    number, text = marker.args
    passed = call.excinfo is None
    _acceptance[number] = (passed and _acceptance.get(number, (True,))[0], text)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        passed, text = _acceptance[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {text}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_config(rng):
    return Config(*(Direction.from_array(rng.normal(size=3)) for _ in range(3)))
