import math

import numpy as np
import pytest
from scipy.integrate import dblquad

from sectorpde.discretization import Field, interpolate_field
from sectorpde.errors import (DomainError, PreconditionError, SingularEvaluationError,
                              UnsupportedError)
from sectorpde.geometry import SectorSpec, lshape, mesh_sector
from sectorpde.singular import (SingularBasis, eval_dual_ps, eval_singular, extract_lambda_cutoff,
                                extract_lambda_dual, extract_lambda_fit, integrate_dual,
                                quintic_cutoff, sector_dual_integral)

# int over the 3pi/4 sector of radius 1 of P_s^1, by adaptive quadrature in polar coordinates
DUAL_INTEGRAL_R1 = 0.3580986219567645


def test_dual_integral_oracle_frozen():
    a = 2.0 / 3.0
    th0 = 0.75 * math.pi
    val, _ = dblquad(lambda r, t: (r ** -a - r ** a) * math.cos(a * t) / math.pi * r,
                     -th0, th0, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13)
    assert val == pytest.approx(DUAL_INTEGRAL_R1, abs=1e-12)
    assert sector_dual_integral(a, 1.0) == pytest.approx(DUAL_INTEGRAL_R1, abs=1e-12)
    # scaling R^(2 - alpha)
    assert sector_dual_integral(a, 8.0) == pytest.approx(DUAL_INTEGRAL_R1 * 8.0 ** (4 / 3))


def _laplacian(f, pts, h=1e-4):
    e = np.array([[h, 0.0], [0.0, h]])
    return sum((f(pts + d) - 2 * f(pts) + f(pts - d)) / h ** 2 for d in e)


@pytest.mark.parametrize("kind", ["S", "S*"])
def test_singular_functions_harmonic_and_vanish_on_sides(kind):
    b = SingularBasis.from_theta0(0.75 * math.pi, corner=(0.3, -0.2), axis=0.4)
    r = np.array([0.5, 1.0, 2.0])
    pts = b.point(r, np.array([-1.0, 0.3, 1.5]))
    lap = _laplacian(lambda p: eval_singular(b, kind, p), pts)
    np.testing.assert_allclose(lap, 0.0, atol=2e-5)
    side = b.point(r, np.full(3, b.theta0 - 1e-12))
    np.testing.assert_allclose(eval_singular(b, kind, side), 0.0, atol=1e-10)


def test_dual_ps_properties():
    b = SingularBasis.from_theta0(0.75 * math.pi)
    R = 3.0
    arc = b.point(np.full(5, R), np.linspace(-2, 2, 5))
    np.testing.assert_allclose(eval_dual_ps(b, R, arc), 0.0, atol=1e-14)
    pts = b.point(np.array([0.5, 1.5]), np.array([0.2, -0.7]))
    np.testing.assert_allclose(_laplacian(lambda p: eval_dual_ps(b, R, p), pts), 0.0, atol=2e-5)
    with pytest.raises(SingularEvaluationError):
        eval_dual_ps(b, R, [[0.0, 0.0]])
    with pytest.raises(DomainError):
        eval_dual_ps(b, R, [[4.0, 0.0]])
    with pytest.raises(SingularEvaluationError):
        eval_singular(b, "S*", [[0.0, 0.0]])


def test_dual_quadrature_integrates_constant():
    m = mesh_sector(SectorSpec(0.75 * math.pi, 4.0, 0.2))
    b = SingularBasis.from_theta0(0.75 * math.pi)
    val = integrate_dual(m, b, 4.0, np.ones(m.n_nodes))
    # the polygonal arc cuts off a little area; the corner is integrated exactly
    assert val == pytest.approx(sector_dual_integral(2 / 3, 4.0), rel=2e-3)


def test_quintic_cutoff():
    B = 0.8
    r = np.array([0.0, 0.4, 0.6, 0.8, 1.0])
    chi, d1, d2 = quintic_cutoff(r, B)
    np.testing.assert_allclose(chi[[0, 1, 3, 4]], [1, 1, 0, 0])
    assert 0 < chi[2] < 1 and d1[2] < 0
    # C^2 at the joints and derivative consistency
    for r0 in (0.4, 0.8):
        c, a1, a2 = quintic_cutoff(np.array([r0 - 1e-7, r0 + 1e-7]), B)
        np.testing.assert_allclose(np.diff(c), 0, atol=1e-6)
        np.testing.assert_allclose(a1, 0, atol=1e-5)
    x = np.linspace(0.45, 0.75, 7)
    h = 1e-6
    num = (quintic_cutoff(x + h, B)[0] - quintic_cutoff(x - h, B)[0]) / (2 * h)
    np.testing.assert_allclose(quintic_cutoff(x, B)[1], num, rtol=1e-6)


def test_rayfit_recovers_synthetic_coefficient():
    th0 = 0.75 * math.pi
    m = mesh_sector(SectorSpec(th0, 2.0, 0.05, core_radius=2.0))
    b = SingularBasis.from_theta0(th0)
    a = b.alpha

    def f(x, y):
        r, t = np.hypot(x, y), np.arctan2(y, x)
        return 1.3 * r ** a * np.cos(a * t) + 0.4 * x + 0.2 * r ** 2 * np.cos(2 * t)

    u = interpolate_field(m, f)
    est = extract_lambda_fit(u, (0.02, 0.2))
    assert est.value == pytest.approx(1.3, rel=5e-3)
    assert est.bracket[0] <= est.value <= est.bracket[1]
    with pytest.raises(PreconditionError):
        extract_lambda_fit(u, (0.2, 0.1))
    with pytest.raises(PreconditionError):
        extract_lambda_fit(u, (0.02, 0.2), rays=[th0])


def test_dual_on_solution_matches_rayfit():
    m = mesh_sector(SectorSpec(0.75 * math.pi, 5.0, 0.1))
    from sectorpde.nonlinear_solve import solve_semilinear
    u, _ = solve_semilinear(m)
    d = extract_lambda_dual(u)
    f = extract_lambda_fit(u, (0.02, 0.2))
    assert d.value > 0
    assert abs(d.value - f.value) / d.value < 0.02
    assert d.bracket[1] - d.bracket[0] < 1e-3 * d.value


def test_salient_corner_unsupported():
    m = mesh_sector(SectorSpec(math.pi / 3, 3.0, 0.2))
    u = Field(m, np.zeros(m.n_nodes))
    with pytest.raises(UnsupportedError):
        extract_lambda_dual(u)
    b = SingularBasis.from_theta0(math.pi / 3)
    with pytest.raises(UnsupportedError):
        extract_lambda_cutoff(u, 1.0, b, 0.5)


def test_cutoff_dual_on_harmonic_singular_field():
    # u = lambda S exactly (not zero on the outer sides) is harmonic with
    # f = 0; the cutoff formula then returns lambda from the chi terms alone
    L = lshape(0.05, corner_scale=0.5)
    from sectorpde.geometry import mesh_polygon
    m = mesh_polygon(L)
    b = SingularBasis.from_corner(L.corner())
    u = Field(m, 0.7 * eval_singular(b, "S", m.nodes))
    est = extract_lambda_cutoff(u, 0.0, b, 0.5)
    assert est.value == pytest.approx(0.7, rel=1e-2)
