import json

import pytest

from qempc.fixtures import FIXTURES, fixture_text, load_fixture
from qempc.quantize import FixedPointFormat


@pytest.fixture(scope="session")
def sat1d():
    return load_fixture("SAT1D")


@pytest.fixture(scope="session")
def gain2():
    return load_fixture("GAIN2")


@pytest.fixture(scope="session")
def box2():
    return load_fixture("BOX2")


@pytest.fixture(scope="session")
def het2():
    return load_fixture("HET2")


@pytest.fixture(scope="session", params=FIXTURES)
def any_fixture(request):
    return load_fixture(request.param)


@pytest.fixture
def sat1d_doc():
    return json.loads(fixture_text("SAT1D"))


def fmt(a, b):
    return FixedPointFormat(a, b)


# acceptance criteria report one line each in the terminal summary
_ACCEPTANCE: list[str] = []


class _Criterion:
    def __init__(self, name):
        self.name = name
        self.details: list[str] = []

    def note(self, text):
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        line = f"{status}  {self.name}"
        if self.details:
            line += "  [" + "; ".join(self.details) + "]"
        _ACCEPTANCE.append(line)
        print(line)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
