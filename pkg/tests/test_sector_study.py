import math

import numpy as np
import pytest

from sectorpde.discretization import Field
from sectorpde.errors import InvalidSpecError
from sectorpde.geometry import SectorSpec, mesh_polygon, mesh_sector, unit_square
from sectorpde.sector_study import (FamilyParams, check_bisector_max, check_lower_bound,
                                    check_nonnegative, check_symmetry, concavity_report,
                                    family_checks, family_mu, lower_bound_values, sweep_R,
                                    verify_minimal_properties)

TH = 0.75 * math.pi


def test_checks_pass_on_small_solution(sector_small):
    res = verify_minimal_properties(sector_small)
    for key in ("a_symmetry", "b_bisector_max", "c_radial_derivative", "d_log_upper",
                "e_lower_bound", "g_nonnegative"):
        assert res[key].passed, (key, res[key])


def test_checks_catch_violations(sector_small):
    m = sector_small.mesh
    th = np.arctan2(m.nodes[:, 1], m.nodes[:, 0])
    skew = sector_small.with_values(sector_small.values + 0.01 * np.sin(th))
    assert not check_symmetry(skew).passed
    off = sector_small.with_values(sector_small.values * (1 + 0.5 * np.sin(th + 0.3) ** 2))
    assert not check_bisector_max(off).passed
    neg = sector_small.with_values(sector_small.values - 0.1)
    assert not check_nonnegative(neg).passed
    assert not check_lower_bound(sector_small.with_values(np.zeros(m.n_nodes)), margin=1.0).passed
    steep = sector_small.with_values(3.0 * np.hypot(*m.nodes.T))
    res = verify_minimal_properties(steep)
    assert not res["c_radial_derivative"].passed and not res["d_log_upper"].passed


def test_lower_bound_values_inscribed_disk():
    p = np.array([[2.0, 0.0], [1.0, 1.0]])
    # on the bisector of the half-plane sector the inscribed radius is min(r, R - r)
    v = lower_bound_values(math.pi / 2, 10.0, p)
    assert v[0] == pytest.approx(math.log1p(4.0 / 8.0))
    assert v[1] == pytest.approx(math.log1p(1.0 / 8.0))


def test_checks_need_sector_mesh():
    m = mesh_polygon(unit_square(0.2))
    with pytest.raises(InvalidSpecError):
        verify_minimal_properties(Field(m, np.zeros(m.n_nodes)))


def test_concavity_report_keys(sector_small):
    rep = concavity_report(sector_small)
    assert set(rep) == {"max_second_difference", "radius", "concave"}


def test_sweep_R_small():
    st = sweep_R(TH, [2.0, 4.0], h=0.2)
    assert st.monotone_in_R.passed
    lam = [st.lambdas[R].value for R in (2.0, 4.0)]
    assert 0 < lam[0] < lam[1]
    assert st.Lambda.bracket == (lam[1], 2 * lam[1] - lam[0])
    d = st.to_dict()
    assert [r["R"] for r in d["runs"]] == [2.0, 4.0]
    assert "f_translation_core_convex" in d["diagnostics"]
    with pytest.raises(InvalidSpecError):
        sweep_R(TH, [4.0, 2.0])


def test_sweep_R_parallel_matches_serial():
    a = sweep_R(TH, [2.0, 3.0], h=0.25, check=False)
    b = sweep_R(TH, [2.0, 3.0], h=0.25, check=False, jobs=2)
    for R in (2.0, 3.0):
        np.testing.assert_array_equal(a.fields[R].values, b.fields[R].values)


def test_salient_sweep_has_no_lambda():
    st = sweep_R(math.pi / 3, [2.0, 3.0], h=0.2)
    assert st.lambdas == {} and st.Lambda is None
    assert st.checks["a_symmetry"].passed


def test_family_identity_and_orderings():
    mesh = mesh_sector(SectorSpec(TH, 4.0, 0.15))
    from sectorpde.nonlinear_solve import solve_semilinear
    u, _ = solve_semilinear(mesh)
    f0 = family_mu(TH, FamilyParams(0, 0), mesh=mesh)
    assert np.abs(f0.v.values - u.values).max() < 1e-9
    for mu in [(1, 0), (0, 1), (1, 1)]:
        f = family_mu(TH, FamilyParams(*mu), mesh=mesh)
        assert all(c.passed for c in family_checks(f, u).values()), mu
    f = family_mu(TH, FamilyParams(1, 0), mesh=mesh)
    r = 1e-3
    assert math.pi * r ** f.alpha * f.evaluate([[r, 0.0]])[0] == pytest.approx(1.0, abs=0.05)


def test_family_validation():
    with pytest.raises(InvalidSpecError):
        family_mu(math.pi / 3, FamilyParams(1, 0), R=2.0, h=0.2)
    with pytest.raises(InvalidSpecError):
        family_mu(TH, FamilyParams(-1, 0), R=2.0, h=0.2)
    mesh = mesh_sector(SectorSpec(TH, 2.0, 0.2))
    other = mesh_sector(SectorSpec(TH, 2.0, 0.2))
    f = family_mu(TH, FamilyParams(0, 1), mesh=mesh)
    with pytest.raises(InvalidSpecError):
        family_checks(f, Field(other, np.zeros(other.n_nodes)))


def test_salient_family_mu_plus():
    f = family_mu(math.pi / 2, FamilyParams(0, 1), R=3.0, h=0.2)
    assert f.alpha == pytest.approx(1.0)
    assert f.v.values.min() >= -1e-12
