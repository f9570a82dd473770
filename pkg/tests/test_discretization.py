import math

import numpy as np
import pytest

from sectorpde.discretization import (Field, as_nodal, assemble_operator, energy_functional,
                                      interpolate_field, neumann_vector)
from sectorpde.errors import DomainError, EvaluationError
from sectorpde.geometry import DiskSpec, lshape, mesh_disk_mixed, mesh_polygon, unit_square


@pytest.fixture(scope="module")
def lmesh():
    return mesh_polygon(lshape(0.1))


def test_stiffness_kills_linear_functions(lmesh):
    op = assemble_operator(lmesh)
    u = 1.5 + 2.0 * lmesh.nodes[:, 0] - 0.3 * lmesh.nodes[:, 1]
    r = op.stiffness @ u
    # interior rows of K u vanish for linear u
    np.testing.assert_allclose(r[op.free], 0.0, atol=1e-12)
    np.testing.assert_allclose(op.stiffness @ np.ones(lmesh.n_nodes), 0.0, atol=1e-12)


def test_stiffness_energy_of_linear_function(lmesh):
    op = assemble_operator(lmesh)
    u = 2.0 * lmesh.nodes[:, 0] - 0.3 * lmesh.nodes[:, 1]
    # int |grad u|^2 = |(2, -0.3)|^2 * area
    assert u @ (op.stiffness @ u) == pytest.approx((4.0 + 0.09) * 3.0, rel=1e-12)


def test_lumped_mass_and_masks(lmesh):
    op = assemble_operator(lmesh)
    assert op.mass.sum() == pytest.approx(3.0, rel=1e-12)
    assert np.all(op.mass > 0)
    bnd = np.unique(lmesh.boundary_edges)
    assert set(op.fixed) == set(bnd)
    assert op.k_ff.shape == (len(op.free), len(op.free))
    assert op.neumann_loads == {}


def test_neumann_loads_integrate_edge_length():
    m = mesh_disk_mixed(DiskSpec((0.0, 0.0), 1.0, split=True, mesh_size=0.1))
    op = assemble_operator(m)
    assert op.neumann_loads[2].sum() == pytest.approx(m.boundary_length(2), rel=1e-12)
    b = neumann_vector(op, {2: 3.0})
    assert b.sum() == pytest.approx(3.0 * m.boundary_length(2))
    with pytest.raises(KeyError):
        neumann_vector(op, {1: 1.0})


def test_evaluate_is_exact_for_linear(lmesh):
    f = interpolate_field(lmesh, lambda x, y: 1.0 + x - 2.0 * y)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, (200, 2))
    pts = pts[~((pts[:, 0] > 0) & (pts[:, 1] < 0))]
    np.testing.assert_allclose(f.evaluate(pts), 1.0 + pts[:, 0] - 2.0 * pts[:, 1], atol=1e-12)


def test_evaluate_outside_raises_or_snaps(lmesh):
    f = interpolate_field(lmesh, lambda x, y: x + y)
    with pytest.raises(DomainError):
        f.evaluate([[0.5, -0.5]])
    # a point just outside the top side snaps to the boundary
    assert f.evaluate([[-0.5, 1.0 + 1e-4]], snap=1e-3)[0] == pytest.approx(0.5, abs=1e-10)


def test_interpolate_rejects_nonfinite(lmesh):
    with pytest.raises(EvaluationError) as exc:
        interpolate_field(lmesh, lambda x, y: np.where(x * x + y * y == 0, np.nan, 1.0))
    assert exc.value.node is not None


def test_field_shape_checked(lmesh):
    with pytest.raises(ValueError):
        Field(lmesh, np.zeros(3))


def test_gradient_of_linear(lmesh):
    f = interpolate_field(lmesh, lambda x, y: 3.0 * x + 0.5 * y)
    np.testing.assert_allclose(f.gradient(), np.tile([3.0, 0.5], (lmesh.n_triangles, 1)), atol=1e-11)


def test_as_nodal_variants(lmesh):
    assert as_nodal(lmesh, 2.0).shape == (lmesh.n_nodes,)
    f = interpolate_field(lmesh, lambda x, y: x)
    assert as_nodal(lmesh, f) is f.values
    np.testing.assert_allclose(as_nodal(lmesh, lambda x, y: y), lmesh.nodes[:, 1])


def test_energy_functional_pieces():
    m = mesh_polygon(unit_square(0.1))
    op = assemble_operator(m)
    # u = 0: only the exponential term, equal to W * area
    assert energy_functional(op, np.zeros(m.n_nodes), 2.5) == pytest.approx(2.5)
    u = m.nodes[:, 0]
    expect = 0.5 + np.sum(op.mass * np.exp(-u))
    assert energy_functional(op, u, 1.0) == pytest.approx(expect, rel=1e-12)
    # vertex quadrature of e^{-x} is close to the exact integral 1 - 1/e
    assert np.sum(op.mass * np.exp(-u)) == pytest.approx(1.0 - math.exp(-1.0), rel=1e-2)
