import cmath
import math

import numpy as np
import pytest
from hypothesis import strategies as st

from aqsig.quantum import QubitSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def spec_from_angles(theta: float, phi: float, chi: float = 0.0) -> QubitSpec:
    """cos(theta/2) e^{i chi} |0> + sin(theta/2) e^{i(chi+phi)} |1>."""
    return QubitSpec(
        math.cos(theta / 2) * cmath.exp(1j * chi),
        math.sin(theta / 2) * cmath.exp(1j * (chi + phi)),
    )


angles = st.floats(min_value=0.0, max_value=2 * math.pi, allow_nan=False)
qubit_specs = st.builds(
    spec_from_angles,
    st.floats(min_value=0.0, max_value=math.pi, allow_nan=False),
    angles,
    angles,
)


# PASS/FAIL lines from the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
