import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from water.runtime import InstanceConfig  # noqa: E402
from water.transports import load_bundled  # noqa: E402

import helpers  # noqa: E402

ACCEPTANCE_LINES = []


def record_acceptance(number, passed, detail):
    ACCEPTANCE_LINES.append((number, "PASS" if passed else "FAIL", detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, status, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {number:>2}: {status}  {detail}")


@pytest.fixture(scope="session")
def plain():
    return load_bundled("plain")


@pytest.fixture(scope="session")
def reverse():
    return load_bundled("reverse")


@pytest.fixture(scope="session")
def aead():
    return load_bundled("aead")


@pytest.fixture(scope="session")
def aead_config():
    return InstanceConfig(b"password=hunter2\n")


@pytest.fixture
def echo():
    with helpers.EchoServer() as server:
        yield server


@pytest.fixture
def fd_audit():
    """Fails the test if process descriptors are not released afterwards."""
    baseline = helpers.open_fds()
    yield baseline
    assert helpers.fds_back_to(baseline), f"descriptor leak: {helpers.open_fds()} open vs {baseline}"
