import numpy as np
import pytest

import groupoid_vi.geometry as geo

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def diagonal_group():
    """Abelian 2x2 diagonal group; exercises the generic exp/log path."""
    basis = np.stack([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    return geo.MatrixGroup(basis=basis, struct_consts=np.zeros((2, 2, 2)),
                           name="diag2")
