import numpy as np
import pytest

from minswitch.core import SwitchedSystem, TrackingSpec
from minswitch.motor import DEFAULT_PARAMS, initial_state_for_targets, motor_system


def constant_rate_system(rates):
    """Scalar-state systems with y = xi and constant xi' = rate per mode."""
    rates = np.atleast_2d(np.asarray(rates, dtype=float))
    m = rates.shape[1]
    fields = [lambda xi, r=r: r.copy() for r in rates]
    return SwitchedSystem(
        n=m,
        m=m,
        fields=fields,
        output=lambda xi: np.asarray(xi, dtype=float),
        output_jacobian=lambda xi: np.eye(m),
    )


@pytest.fixture
def params():
    return DEFAULT_PARAMS


@pytest.fixture
def motor(params):
    return motor_system(params)


@pytest.fixture
def paper_spec():
    return TrackingSpec(y_d=[50.0, 2.0], eps=[0.1, 0.01])


@pytest.fixture
def nominal(params):
    return initial_state_for_targets(params, 50.0, 2.0).to_vector()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
