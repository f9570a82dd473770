import math

import pytest

from sectorpde.geometry import SectorSpec, mesh_sector
from sectorpde.nonlinear_solve import solve_semilinear

# criterion number -> (passed, summary); filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def sector_small():
    """u_R on the 3pi/4 sector with R = 5, h = 0.2."""
    mesh = mesh_sector(SectorSpec(0.75 * math.pi, 5.0, 0.2))
    u, rep = solve_semilinear(mesh)
    return u


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {msg}")
