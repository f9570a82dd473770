"""Closed-form solutions and the radial shooting solver used as ground truth."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import DomainError, OracleError

BALL = "BALL"
ANNULUS = "ANNULUS"

SQRT2 = math.sqrt(2.0)


def halfplane_profile(x1):
    """2 log(1 + x1/sqrt 2): the one-dimensional solution on the half-line."""
    x1 = np.asarray(x1, dtype=float)
    if np.any(x1 < 0):
        raise DomainError("half-plane profile needs x1 >= 0")
    return 2.0 * np.log1p(x1 / SQRT2)


def disk_A(R):
    return SQRT2 + math.sqrt(2.0 + R * R)


def disk_closed_form(R, x_rel):
    """Solution on the disk of radius R at distance ``x_rel`` from the centre."""
    x = np.asarray(x_rel, dtype=float)
    if np.any(x < 0) or np.any(x > R * (1 + 1e-14)):
        raise DomainError("disk closed form needs 0 <= |x - x0| <= R")
    A2 = disk_A(R) ** 2
    return np.log((A2 - x * x) ** 2 / (8.0 * A2))


def disk_center_alt(R):
    """Centre value written as log(R^2 + 4 + sqrt(8R^2 + 16)) - log 8."""
    return math.log(R * R + 4.0 + math.sqrt(8.0 * R * R + 16.0)) - math.log(8.0)


def disk_mass(R):
    """Total mass int e^{-phi} over the disk of radius R (equals the outward flux)."""
    A2 = disk_A(R) ** 2
    return 8.0 * math.pi * R * R / (A2 - R * R)


# ---------------------------------------------------------------------------
# radial problem (r v')' = r e^v, v = -2 log eps on the boundary


@dataclass
class RadialProfile:
    kind: str
    radii: tuple
    epsilon: float
    grid: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    boundary_derivative: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def target(self) -> float:
        return -2.0 * math.log(self.epsilon)

    def rows(self):
        return np.column_stack([self.grid, self.values, self.derivative])

    def to_csv(self, path):
        from .io import fmt

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["r", "v", "v'"])
            for r, v, d in self.rows():
                w.writerow([fmt(r), fmt(v), fmt(d)])


def _rhs(r, y):
    # y = (v, w) with w = r v'
    return [y[1] / r, r * math.exp(min(y[0], 700.0))]


def _blowup(r, y):
    return y[0] - 60.0


_blowup.terminal = True


def _integrate(r0, r1, y0, tol, dense=False):
    sol = solve_ivp(_rhs, (r0, r1), y0, method="DOP853", rtol=tol, atol=tol,
                    events=_blowup, dense_output=dense)
    if sol.status == 1:
        return None
    if sol.status != 0:
        raise OracleError(f"radial integration failed: {sol.message}")
    return sol


def _ball(eta, eps, tol, n_grid):
    target = -2.0 * math.log(eps)
    r0 = 1e-6 * eta

    def start(v0):
        e = math.exp(v0)
        return [v0 + e * r0 * r0 / 4.0, e * r0 * r0 / 2.0]

    def F(v0):
        sol = _integrate(r0, eta, start(v0), tol)
        return np.inf if sol is None else sol.y[0, -1] - target

    hi = target
    lo = target - 1.0
    while F(lo) >= 0:
        lo -= 2.0 * (hi - lo)
        if lo < target - 1e4:
            raise OracleError("could not bracket the ball shooting parameter")
    v0 = brentq(F, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    sol = _integrate(r0, eta, start(v0), tol, dense=True)
    r = np.linspace(0.0, eta, n_grid)
    y = sol.sol(np.maximum(r, r0))
    v = y[0]
    dv = np.where(r > r0, y[1] / np.maximum(r, r0), 0.0)
    # series start below r0
    small = r < r0
    v[small] = v0 + math.exp(v0) * r[small] ** 2 / 4.0
    dv[small] = math.exp(v0) * r[small] / 2.0
    v[-1] = target
    dv_eta = sol.y[1, -1] / eta
    dv[-1] = dv_eta
    return RadialProfile(BALL, (eta,), eps, r, v, dv, {"eta": dv_eta}, {"v0": v0, "tol": tol})


def _annulus(a, b, eps, tol, n_grid):
    target = -2.0 * math.log(eps)

    def F(s):
        sol = _integrate(a, b, [target, a * s], tol)
        return np.inf if sol is None else sol.y[0, -1] - target

    bound = 4.0 / a + SQRT2 / eps
    hi = 0.0
    lo = -bound
    while F(lo) >= 0:
        lo *= 2.0
        if lo < -1e8:
            raise OracleError("could not bracket the annulus shooting parameter")
    if not F(hi) > 0:
        raise OracleError("annulus shooting: F(0) is not positive")
    s = brentq(F, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
    sol = _integrate(a, b, [target, a * s], tol, dense=True)
    r = np.linspace(a, b, n_grid)
    y = sol.sol(r)
    v, dv = y[0], y[1] / r
    v[0] = v[-1] = target
    dv_b = sol.y[1, -1] / b
    dv[0], dv[-1] = s, dv_b
    c = brentq(lambda t: sol.sol(t)[1], a, b, xtol=1e-14)
    vc = float(sol.sol(c)[0])
    return RadialProfile(ANNULUS, (a, b), eps, r, v, dv, {"a": s, "b": dv_b},
                         {"c": c, "v_c": vc, "tol": tol})


def radial_bvp(kind, radii, epsilon, tol=1e-12, n_grid=201) -> RadialProfile:
    """Shooting solution of (r v')' = r e^v with v = -2 log(epsilon) on the boundary.

    BALL: radii = eta (or (eta,)); ANNULUS: radii = (a, b) with a < b.
    """
    if not epsilon > 0:
        raise OracleError("epsilon must be positive")
    kind = kind.upper()
    radii = (radii,) if np.isscalar(radii) else tuple(radii)
    if kind == BALL:
        (eta,) = radii
        if not eta > 0:
            raise OracleError("ball radius must be positive")
        return _ball(float(eta), float(epsilon), tol, n_grid)
    if kind == ANNULUS:
        a, b = map(float, radii)
        if not 0 < a < b:
            raise OracleError("annulus needs 0 < a < b")
        return _annulus(a, b, float(epsilon), tol, n_grid)
    raise OracleError(f"unknown radial kind {kind!r}")


def ball_physical_root(eta, eps):
    """Nonnegative root of eta^2 p^2 / 2 = eta^2/eps^2 - 2 eta p."""
    return (-2.0 * eta + math.sqrt(4.0 * eta ** 2 + 2.0 * eta ** 4 / eps ** 2)) / eta ** 2


def ball_lower_bound(eta, eps):
    return 2.0 * eta / eps ** 2 / (math.sqrt(2.0 * eta ** 2 / eps ** 2) + 2.0)


def annulus_derivative_bound(a, eps):
    return 4.0 / a + SQRT2 / eps


def radial_identity_check(profile: RadialProfile) -> dict:
    """Residuals of the integral identities satisfied by exact radial profiles."""
    eps = profile.epsilon
    if profile.kind == BALL:
        (eta,) = profile.radii
        p = profile.boundary_derivative["eta"]
        lhs = 0.5 * eta ** 2 * p ** 2
        rhs = eta ** 2 / eps ** 2 - 2.0 * eta * p
        lb = ball_lower_bound(eta, eps)
        return {"kind": BALL, "identity_residual": abs(lhs - rhs),
                "physical_root": ball_physical_root(eta, eps),
                "root_error": abs(p - ball_physical_root(eta, eps)),
                "lower_bound": lb, "lower_bound_ok": bool(p >= lb),
                "derivative_nonnegative": bool(p >= 0)}
    a, b = profile.radii
    p = profile.boundary_derivative["a"]
    c, vc = profile.meta["c"], profile.meta["v_c"]
    lhs = -(a * p) ** 2
    rhs = 2.0 * c * c * math.exp(vc) - 2.0 * a * a / eps ** 2 + 4.0 * a * p
    bound = annulus_derivative_bound(a, eps)
    return {"kind": ANNULUS, "identity_residual": abs(lhs - rhs), "c": c,
            "c_inside": bool(a < c < b), "derivative_bound": bound,
            "bound_ok": bool(p <= 0 and abs(p) <= bound)}
