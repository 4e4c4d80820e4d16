import numpy as np
import pytest

from navier_bubbles.grid import make_domain

ACCEPTANCE: dict[str, str] = {}


def record(criterion: str, ok: bool, detail: str):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE[criterion] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int("".join(c for c in k if c.isdigit()) or 0), k)):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture(scope="session")
def box15():
    return make_domain("box", 5, side=1.0, N=15)


@pytest.fixture(scope="session")
def ball():
    return make_domain("ball", 5, R=1.0, M=2001)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
