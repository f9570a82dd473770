import math

import numpy as np
import pytest

from sectorpde.errors import InvalidSpecError, PreconditionError
from sectorpde.geometry import lshape, unit_square
from sectorpde.plasma import (blowup_compare, flux_mass, interior_samples, plasma_mesh, sandwich_check,
                              solve_plasma, sweep_eps)
from sectorpde.sector_study import solve_minimal


def test_volume_and_flux_mass_agree_eps1():
    c = solve_plasma(unit_square(0.025), 1.0, layer_factor=None)
    assert abs(c.mass - c.mass_flux) / c.mass < 0.02
    # the edge-gradient flux is a cruder estimate of the same quantity
    assert abs(flux_mass(c.field, "triangle") - c.mass) / c.mass < 0.1
    with pytest.raises(ValueError):
        flux_mass(c.field, "spectral")


def test_constant_potential_rescales_kappa():
    sq = unit_square(0.1)
    m = plasma_mesh(sq, 0.2)
    a = solve_plasma(sq, 0.2, lambda x, y: 0.0 * x + 0.7, mesh=m)
    b = solve_plasma(sq, 0.2 * math.exp(-0.35), mesh=m)
    assert np.abs(a.field.values - b.field.values).max() < 1e-8
    assert a.mass == pytest.approx(b.mass, rel=1e-10)


def test_lshape_case_positive_with_lambda():
    c = solve_plasma(lshape(0.05), 0.1)
    assert c.field.values.min() >= -1e-12
    assert c.resolved and c.layer_width == pytest.approx(0.01)
    assert c.lam is not None and c.lam.value > 0
    assert abs(c.lam.value - c.lam_dual.value) / c.lam.value < 0.05
    d = c.to_dict()
    assert d["eps_alpha_lambda"] == pytest.approx(0.1 ** (2 / 3) * c.lam.value)


def test_mass_increases_with_kappa():
    sq = unit_square(0.1)
    masses = [solve_plasma(sq, e, extract=False).mass for e in (0.5, 0.3, 0.2)]
    assert masses[0] < masses[1] < masses[2]


def test_sandwich_degenerate_and_ordered():
    sq = unit_square(0.1)
    flat = sandwich_check(sq, 25.0, lambda x, y: 0.0 * x)
    assert flat["complete"] and flat["mass_ordered"]
    assert flat["mass"][0] == pytest.approx(flat["mass"][2], rel=1e-12)
    tilt = sandwich_check(sq, 25.0, lambda x, y: x)
    assert tilt["mass_ordered"] and tilt["mass"][0] < tilt["mass"][1] < tilt["mass"][2]
    with pytest.raises(InvalidSpecError):
        sandwich_check(sq, -1.0, None)


def test_sweep_eps_validation_and_report():
    sq = unit_square(0.1)
    with pytest.raises(InvalidSpecError):
        sweep_eps(sq, [0.5, 0.3])
    with pytest.raises(InvalidSpecError):
        sweep_eps(sq, [0.3, 0.5, 0.2])
    rep = sweep_eps(sq, [0.5, 0.35, 0.25])
    assert len(rep.rows) == 3 and rep.mass_slope < 0
    lim = rep.eps_mass_limit
    assert lim["target"] == pytest.approx(4 * math.sqrt(2))
    assert rep.w_trend["points"] > 0
    assert [r[0] for r in rep.table()] == [0.5, 0.35, 0.25]


def test_bad_potential_rejected():
    with pytest.raises(InvalidSpecError):
        solve_plasma(unit_square(0.2), 0.5, lambda x, y: np.where(x > 0, 0.0, np.inf))


def test_interior_samples_inside():
    L = lshape(0.1)
    p = interior_samples(L)
    assert len(p) > 0
    assert not np.any((p[:, 0] > 0) & (p[:, 1] < 0))


def test_blowup_compare_preconditions():
    c = solve_plasma(unit_square(0.1), 0.2, extract=False)
    lo, _ = solve_minimal(0.75 * math.pi, 2.0, 0.2)
    with pytest.raises(PreconditionError):
        blowup_compare(c, lo, lo)
    c = solve_plasma(lshape(0.1), 0.2)
    big, _ = solve_minimal(0.75 * math.pi, 8.0, 0.2)
    with pytest.raises(PreconditionError):
        blowup_compare(c, big, big)  # lower sector does not fit
    up, _ = solve_minimal(0.75 * math.pi, 10.0, 0.2)
    out = blowup_compare(c, lo, up, window=2.0)
    assert out["lower_ok"]
    assert out["upper_covers_domain"] == (10.0 * 0.2 >= math.sqrt(2))
