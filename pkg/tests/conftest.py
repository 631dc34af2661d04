import numpy as np
import pytest

from nfreach import Box, FeedforwardNetwork, LtvSystem
from nfreach.fixtures import di_network

DI_A = np.array([[1.0, 1.0], [0.0, 1.0]])
DI_B = np.array([[0.5], [1.0]])
DI_X0 = Box([2.5, -0.25], [3.0, 0.25])


def zero_net(n_in=2, n_out=1, hidden=(5, 5)):
    widths = [n_in, *hidden, n_out]
    return FeedforwardNetwork.from_weights(
        [np.zeros((b, a)) for a, b in zip(widths[:-1], widths[1:])], [np.zeros(b) for b in widths[1:]]
    )


@pytest.fixture
def di():
    return LtvSystem(DI_A, DI_B, u_limits=([-1.0], [1.0]))


@pytest.fixture
def di_free():
    return LtvSystem(DI_A, DI_B)


@pytest.fixture
def di_net():
    return di_network()


@pytest.fixture
def x0():
    return DI_X0


ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
