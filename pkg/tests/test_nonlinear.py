import math

import numpy as np
import pytest

from sectorpde.discretization import assemble_operator
from sectorpde.errors import DivergedError, PreconditionError
from sectorpde.geometry import DiskSpec, mesh_disk, mesh_disk_mixed, mesh_polygon, unit_square
from sectorpde.nonlinear_solve import (SolveOptions, discrete_residual, dirichlet_values,
                                       monotone_iterate, solve_semilinear)
from sectorpde.oracles import disk_A, disk_closed_form


@pytest.fixture(scope="module")
def disk():
    return mesh_disk(DiskSpec((0.0, 0.0), 1.0, mesh_size=0.05))


def test_disk_matches_closed_form(disk):
    u, rep = solve_semilinear(disk)
    assert rep.converged and rep.residual <= 1e-10
    exact = disk_closed_form(1.0, np.minimum(np.hypot(*disk.nodes.T), 1.0))
    assert np.abs(u.values - exact).max() < 2e-4
    # energies recorded along Newton decrease
    assert np.all(np.diff(rep.energy) <= 0)


def test_residual_vanishes_at_solution(disk):
    u, _ = solve_semilinear(disk)
    op = assemble_operator(disk)
    r = discrete_residual(op, u, 1.0)
    assert np.abs(r).max() < 1e-10 * max(1.0, op.mass.max())


def test_mixed_disk_neumann_sign():
    # Dirichlet = exact values on the left half, outward derivative on the right
    R = 1.0
    A2 = disk_A(R) ** 2
    dudn = -4.0 * R / (A2 - R * R)
    m = mesh_disk_mixed(DiskSpec((0.0, 0.0), R, split=True, mesh_size=0.04))
    u, rep = solve_semilinear(m, dirichlet={1: float(disk_closed_form(R, R))}, neumann={2: dudn})
    exact = disk_closed_form(R, np.minimum(np.hypot(*m.nodes.T), R))
    assert np.abs(u.values - exact).max() < 5e-4
    # the wrong sign gives a visibly different solution
    w, _ = solve_semilinear(m, dirichlet={1: float(disk_closed_form(R, R))}, neumann={2: -dudn})
    assert np.abs(w.values - exact).max() > 0.1


def test_monotone_iteration_matches_newton():
    m = mesh_polygon(unit_square(0.1))
    u, _ = solve_semilinear(m, weight=5.0)
    hist = []
    v = monotone_iterate(m, weight=5.0, history=hist)
    assert np.abs(u.values - v.values).max() < 1e-8
    steps = np.diff(np.array(hist), axis=0)
    assert steps.min() >= -1e-12  # iterates increase


def test_monotone_rejects_bad_start():
    m = mesh_polygon(unit_square(0.2))
    with pytest.raises(PreconditionError):
        monotone_iterate(m, start=np.full(m.n_nodes, 1.0))  # exceeds the Dirichlet data
    u, _ = solve_semilinear(m)
    bump = u.values + 0.5 * (u.values > 0)
    with pytest.raises(PreconditionError):
        monotone_iterate(m, start=bump)  # above the solution: not a subsolution


def test_preconditions_and_divergence():
    m = mesh_polygon(unit_square(0.2))
    with pytest.raises(PreconditionError):
        solve_semilinear(m, weight=-1.0)
    with pytest.raises(DivergedError) as exc:
        solve_semilinear(m, weight=400.0, opts=SolveOptions(max_newton=1))
    assert exc.value.last is not None
    with pytest.raises(ValueError):
        SolveOptions(linear_solver="qr")


def test_cg_backend_agrees():
    m = mesh_polygon(unit_square(0.1))
    a, _ = solve_semilinear(m, weight=3.0)
    b, _ = solve_semilinear(m, weight=3.0, opts=SolveOptions(linear_solver="cg"))
    assert np.abs(a.values - b.values).max() < 1e-9


def test_dirichlet_values_callable_and_priority():
    m = mesh_polygon(unit_square(0.25))
    g = dirichlet_values(m, {1: 1.0, 2: lambda x, y: 2.0 + 0 * x})
    corner = np.flatnonzero(np.all(np.isclose(m.nodes, [1.0, 0.0]), axis=1))
    assert g[corner[0]] == 1.0  # lowest tag wins on shared nodes
    u, _ = solve_semilinear(m, dirichlet=1.0)
    assert np.allclose(u.values[np.unique(m.boundary_edges)], 1.0)
