import numpy as np
import pytest

from qtopo.model import assemble, five_edge, tri3
from qtopo.qsim import backend


@pytest.fixture(params=backend.available())
def kernel_backend(request):
    """Run the test once per available kernel implementation."""
    previous = backend.name()
    backend.set_backend(request.param)
    yield request.param
    backend.set_backend(previous)


@pytest.fixture(scope="session")
def tri3_sys():
    return assemble(tri3())


@pytest.fixture(scope="session")
def five_sys():
    return assemble(five_edge())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance reporting: one line per criterion in the terminal summary ------

_criteria: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    info = dict(report.user_properties).get("criterion")
    if info is None:
        return
    number, title = info
    detail = dict(report.user_properties).get("detail", "")
    entry = _criteria.setdefault(number, [title, True, []])
    entry[1] = entry[1] and report.passed
    if detail:
        entry[2].append(detail)


def pytest_runtest_setup(item):
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        item.user_properties.append(("criterion", tuple(mark.args)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, ok, details = _criteria[number]
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title}"
        if details:
            line += "  (" + "; ".join(details) + ")"
        terminalreporter.write_line(line)
