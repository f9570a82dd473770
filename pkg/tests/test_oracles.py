import math

import numpy as np
import pytest
from scipy.integrate import solve_bvp

from sectorpde.errors import DomainError, OracleError
from sectorpde.oracles import (ANNULUS, BALL, annulus_derivative_bound, ball_lower_bound,
                               ball_physical_root, disk_center_alt, disk_closed_form, disk_mass,
                               halfplane_profile, radial_bvp, radial_identity_check)

# sqrt(6) - 2: v'(1) for the unit ball with eps = 1, from the closed form on the disk
BALL_SLOPE = 0.4494897427831781


def test_ball_slope_frozen():
    assert math.sqrt(6.0) - 2.0 == pytest.approx(BALL_SLOPE, abs=1e-15)
    p = radial_bvp(BALL, 1.0, 1.0)
    assert p.boundary_derivative["eta"] == pytest.approx(BALL_SLOPE, abs=1e-9)
    assert ball_physical_root(1.0, 1.0) == pytest.approx(BALL_SLOPE, abs=1e-14)


def test_ball_profile_is_minus_disk_closed_form():
    p = radial_bvp(BALL, 1.0, 1.0, n_grid=101)
    np.testing.assert_allclose(p.values, -disk_closed_form(1.0, p.grid), atol=1e-9)
    # derivative of the closed form: 4 r / (A^2 - r^2)
    A2 = (math.sqrt(2) + math.sqrt(3)) ** 2
    np.testing.assert_allclose(p.derivative, 4 * p.grid / (A2 - p.grid ** 2), atol=1e-8)


def _bvp_reference(a, b, eps):
    """Independent collocation solution of (r v')' = r e^v, v = -2 log eps at r = a, b."""
    t = -2.0 * math.log(eps)
    r = np.linspace(a, b, 400)

    def f(r, y):
        return np.vstack([y[1], -y[1] / r + np.exp(y[0])])

    def bc(ya, yb):
        return np.array([ya[0] - t, yb[0] - t])

    y0 = np.vstack([np.full_like(r, t), np.zeros_like(r)])
    sol = solve_bvp(f, bc, r, y0, tol=1e-10, max_nodes=200000)
    assert sol.success
    return sol


@pytest.mark.parametrize("a,b,eps", [(1.0, 2.0, 1.0), (0.5, 1.5, 0.5)])
def test_annulus_against_collocation(a, b, eps):
    p = radial_bvp(ANNULUS, (a, b), eps)
    ref = _bvp_reference(a, b, eps)
    assert p.boundary_derivative["a"] == pytest.approx(ref.sol(a)[1], abs=1e-6)
    assert p.boundary_derivative["b"] == pytest.approx(ref.sol(b)[1], abs=1e-6)
    np.testing.assert_allclose(p.values, ref.sol(p.grid)[0], atol=1e-6)
    chk = radial_identity_check(p)
    assert chk["identity_residual"] < 1e-8
    assert chk["c_inside"] and chk["bound_ok"]


@pytest.mark.parametrize("eps", [1.0, 0.1, 0.01])
def test_ball_identity_and_bound(eps):
    p = radial_bvp(BALL, 1.0, eps)
    chk = radial_identity_check(p)
    assert chk["identity_residual"] <= 1e-8 * max(1.0, eps ** -2)
    assert chk["root_error"] <= 1e-6 * max(1.0, chk["physical_root"])
    assert chk["derivative_nonnegative"]


def test_ball_lower_bound_formula():
    # the bound is a closed-form expression; check it at eps = eta = 1
    assert ball_lower_bound(1.0, 1.0) == pytest.approx(2.0 / (math.sqrt(2.0) + 2.0))
    assert annulus_derivative_bound(2.0, 0.5) == pytest.approx(2.0 + 2.0 * math.sqrt(2.0))


def test_disk_identities():
    for R in (0.5, 1.0, 3.0):
        assert disk_closed_form(R, 0.0) == pytest.approx(disk_center_alt(R), rel=1e-13)
        assert disk_closed_form(R, R) == pytest.approx(0.0, abs=1e-13)
        # mass equals the outward flux 2 pi R |u'(R)| of the closed form
        h = 1e-6
        du = (disk_closed_form(R, R) - disk_closed_form(R, R - h)) / h
        assert disk_mass(R) == pytest.approx(-2 * math.pi * R * du, rel=1e-5)
    with pytest.raises(DomainError):
        disk_closed_form(1.0, 1.5)


def test_halfplane_profile():
    x = np.linspace(0, 5, 11)
    v = halfplane_profile(x)
    assert v[0] == 0.0
    # -v'' = e^{-v}
    h = 1e-4
    lap = (halfplane_profile(x[1:] + h) - 2 * halfplane_profile(x[1:]) + halfplane_profile(x[1:] - h)) / h ** 2
    np.testing.assert_allclose(-lap, np.exp(-v[1:]), rtol=1e-5)
    with pytest.raises(DomainError):
        halfplane_profile([-0.1])


def test_radial_errors(tmp_path):
    with pytest.raises(OracleError):
        radial_bvp(ANNULUS, (2.0, 1.0), 1.0)
    with pytest.raises(OracleError):
        radial_bvp(BALL, 1.0, 0.0)
    with pytest.raises(OracleError):
        radial_bvp("TORUS", 1.0, 1.0)
    p = radial_bvp(BALL, 1.0, 1.0, n_grid=11)
    p.to_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "r,v,v'" and len(lines) == 12
