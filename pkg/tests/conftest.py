import functools
import warnings

import pytest

from influxion.exterior import build_basis
from influxion.influence import assemble
from influxion.interior import Geometry


@functools.cache
def _basis(H, K, L):
    return tuple(build_basis(Geometry(H, K, L)))


@functools.cache
def _system(H, K, L, mode, dropped):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return assemble(Geometry(H, K, L), _basis(H, K, L), mode=mode, dropped=dropped)


@pytest.fixture(scope="session")
def basis_for():
    """Cached exterior basis per ``(H, K, L)``."""
    return lambda H, K, L=None: _basis(float(H), K, K if L is None else L)


@pytest.fixture(scope="session")
def system_for():
    """Cached influence system per ``(H, K, L, mode, dropped)``."""

    def get(H, K, L=None, mode="lobatto", dropped=None):
        return _system(float(H), K, K if L is None else L, mode, dropped)

    return get


ACCEPTANCE_LINES = []


@pytest.fixture
def report(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def emit(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
