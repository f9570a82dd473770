"""Minimal solutions on truncated sectors: R-sweeps, property checks, the mu-family."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .discretization import Field, assemble_operator
from .errors import InvalidSpecError, SectorPDEError
from .geometry import Mesh, SectorSpec, mesh_sector
from .nonlinear_solve import SolveOptions, solve_semilinear
from .singular import (SingularBasis, SingularityEstimate, eval_singular_polar,
                       extract_lambda_dual, extract_lambda_fit)

log = logging.getLogger(__name__)

# default RAYFIT window for sector solutions (the equation has unit length scale)
FIT_WINDOW = (0.02, 0.2)


@dataclass
class CheckResult:
    passed: bool
    residual: float
    detail: str = ""

    def to_dict(self):
        return {"passed": bool(self.passed), "residual": float(self.residual),
                "detail": self.detail}


@dataclass
class MinimalSolutionStudy:
    theta0: float
    radii: list
    h: float
    beta: float
    fields: dict = field(default_factory=dict)
    lambdas: dict = field(default_factory=dict)  # R -> SingularityEstimate (DUAL)
    fits: dict = field(default_factory=dict)  # R -> SingularityEstimate (RAYFIT)
    reports: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    concavity: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    monotone_in_R: Optional[CheckResult] = None
    Lambda: Optional[SingularityEstimate] = None
    failures: dict = field(default_factory=dict)

    @property
    def alpha(self):
        return math.pi / (2 * self.theta0)

    def to_dict(self) -> dict:
        per_R = []
        for R in self.radii:
            row = {"R": float(R)}
            if R in self.fields:
                f = self.fields[R]
                row["nodes"] = int(f.mesh.n_nodes)
                row["u_at_1"] = float(f.evaluate([[1.0, 0.0]])[0]) if R > 1 else None
                row["solve"] = self.reports[R].to_dict()
            if R in self.lambdas:
                row["lambda_dual"] = self.lambdas[R].to_dict()
            if R in self.fits:
                row["lambda_fit"] = self.fits[R].to_dict()
            if R in self.failures:
                row["failure"] = self.failures[R]
            per_R.append(row)
        return {"theta0": float(self.theta0), "alpha": float(self.alpha), "h": float(self.h),
                "beta": float(self.beta), "runs": per_R,
                "checks": {k: v.to_dict() for k, v in self.checks.items()},
                "diagnostics": {k: v.to_dict() for k, v in self.diagnostics.items()},
                "concavity": self.concavity,
                "monotone_in_R": None if self.monotone_in_R is None else self.monotone_in_R.to_dict(),
                "Lambda": None if self.Lambda is None else self.Lambda.to_dict()}


def solve_minimal(theta0, R, h, beta=None, core_radius=None, opts=None):
    spec = SectorSpec(theta0, R, h, grading_exponent=beta, core_radius=core_radius)
    mesh = mesh_sector(spec)
    u, rep = solve_semilinear(mesh, 1.0, opts=opts)
    return u, rep


def _solve_task(args):
    try:
        return solve_minimal(*args)
    except SectorPDEError as exc:
        return exc


def sample_points(theta0, R, n_r=12, n_th=9, margin=2.0):
    """Fixed interior sample grid of Omega_R (used for cross-R comparisons)."""
    r = np.geomspace(0.1, max(0.2, R - margin), n_r)
    th = theta0 * np.linspace(-0.9, 0.9, n_th)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    return np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])


def sweep_R(theta0, radii: Sequence[float], h=0.1, beta=None, core_radius=None,
            opts: Optional[SolveOptions] = None, fit_window=FIT_WINDOW,
            check=True, jobs: int = 1) -> MinimalSolutionStudy:
    """Solve on Omega_R for each R; extract Lambda_R; check the largest field."""
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise InvalidSpecError("R list must be strictly increasing")
    spec0 = SectorSpec(theta0, radii[0], h, grading_exponent=beta)
    st = MinimalSolutionStudy(theta0, radii, h, spec0.beta)
    reentrant = spec0.alpha() < 1.0
    tasks = [(theta0, R, h, beta, core_radius, opts) for R in radii]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_solve_task, tasks))
    else:
        results = [_solve_task(t) for t in tasks]
    for R, res in zip(radii, results):
        if isinstance(res, Exception):
            log.warning("solve failed for R=%g: %s", R, res)
            st.failures[R] = str(res)
            continue
        u, rep = res
        st.fields[R] = u
        st.reports[R] = rep
        if reentrant:
            st.lambdas[R] = extract_lambda_dual(u)
            try:
                st.fits[R] = extract_lambda_fit(u, fit_window)
            except SectorPDEError as exc:
                st.failures[R] = f"rayfit: {exc}"
    done = [R for R in radii if R in st.fields]
    if len(done) >= 2:
        pts = sample_points(theta0, done[0])
        vals = [st.fields[R].evaluate(pts) for R in done]
        worst = max(float(np.max(a - b)) for a, b in zip(vals, vals[1:]))
        st.monotone_in_R = CheckResult(worst <= 1e-3, worst, "max u_R - u_R' at shared points")
    lam = [st.lambdas[R].value for R in done if R in st.lambdas]
    if len(lam) >= 2:
        last, prev = lam[-1], lam[-2]
        st.Lambda = SingularityEstimate(last, "DUAL", (last, last + (last - prev)),
                                        {"extrapolation": "last-two", "R": done[-1]})
    elif len(lam) == 1:
        st.Lambda = SingularityEstimate(lam[0], "DUAL", (lam[0], lam[0]), {"R": done[-1]})
    if check and done:
        st.checks = verify_minimal_properties(st.fields[done[-1]])
        st.concavity = concavity_report(st.fields[done[-1]])
        st.diagnostics = {f"f_translation_{k}": v
                          for k, v in translation_diagnostics(st.fields[done[-1]]).items()}
    return st


# ---------------------------------------------------------------------------
# property checks


def _sector_data(u: Field):
    info = u.mesh.info
    if info.get("kind") != "sector":
        raise InvalidSpecError("property checks need a sector mesh")
    return info["theta0"], info["radius"]


def check_symmetry(u: Field, tol=1e-9):
    mirror = u.mesh.info.get("mirror")
    if mirror is not None:
        err = float(np.abs(u.values - u.values[mirror]).max())
    else:
        p = u.mesh.nodes
        err = float(np.abs(u.values - u.evaluate(p * [1, -1])).max())
    return CheckResult(err <= tol, err, "max |u(r,th) - u(r,-th)|")


def check_bisector_max(u: Field, tol=1e-3):
    """Angular maximum on each ring within one angular step of theta = 0.

    A ring passes if the best value within one step of the bisector is no
    more than ``tol`` below the ring maximum: on rings where u is nearly flat
    in theta the discrete argmax is decided by triangulation noise.
    """
    th0, R = _sector_data(u)
    worst_gap = 0.0
    worst_steps = 0.0
    bad = 0
    for ring in u.mesh.info["rings"]:
        v = u.values[ring]
        if v.max() <= 1e-12:
            continue
        p = u.mesh.nodes[ring]
        th = np.arctan2(p[:, 1], p[:, 0])
        if th0 == math.pi:
            th[0] = -math.pi
        step = float(np.max(np.diff(np.sort(th))))
        gap = float(v.max() - v[np.abs(th) <= step * (1 + 1e-9)].max())
        worst_steps = max(worst_steps, abs(th[np.argmax(v)]) / step)
        worst_gap = max(worst_gap, gap)
        bad += gap > tol
    return CheckResult(bad == 0, worst_gap,
                       f"{bad} rings with off-axis maximum; argmax up to {worst_steps:.0f} steps off")


def check_radial_derivative(u: Field, tol=0.05):
    g = u.gradient()
    c = u.mesh.nodes[u.mesh.triangles].mean(axis=1)
    xr = (c * g).sum(axis=1)
    worst = float(xr.max())
    return CheckResult(worst <= 2.0 + tol, worst, "max x . grad u over triangles")


def check_log_upper(u: Field, tol=0.05):
    r = np.hypot(*u.mesh.nodes.T)
    sup1 = float(u.values[r <= 1.0].max())
    far = r >= 1.0
    excess = u.values[far] - (sup1 + 2.0 * np.log(r[far]))
    worst = float(excess.max())
    return CheckResult(worst <= tol, worst, "max u - sup_{|y|<=1} u - 2 log|x|")


def lower_bound_values(theta0, R, points):
    """log(1 + rho^2/8) with rho the radius of a disk inscribed in Omega_R at x."""
    r = np.hypot(points[:, 0], points[:, 1])
    th = np.abs(np.arctan2(points[:, 1], points[:, 0]))
    rho = np.minimum(r * np.sin(np.minimum(theta0 - th, math.pi / 2)), R - r)
    rho = np.maximum(rho, 0.0)
    return np.log1p(rho ** 2 / 8.0)


def check_lower_bound(u: Field, tol=0.05, margin=2.0):
    th0, R = _sector_data(u)
    p = u.mesh.nodes
    r = np.hypot(*p.T)
    sel = (r <= R - margin) & (r > 0)
    lb = lower_bound_values(th0, R, p[sel])
    worst = float(np.max(lb - u.values[sel], initial=-np.inf))
    return CheckResult(worst <= tol, worst, "max lower bound - u (nodes >= margin inside arc)")


def _segment_inside(theta0, a, b, n=16):
    t = np.linspace(0.0, 1.0, n)[:, None]
    seg = a[None, :] * (1 - t) + b[None, :] * t
    th = np.abs(np.arctan2(seg[:, 1], seg[:, 0]))
    r = np.hypot(seg[:, 0], seg[:, 1])
    return bool(np.all((th < theta0) | (r < 1e-14)))


def check_translation(u: Field, tol=1e-3, margin=2.0, cone=None, n=400, seed=0):
    """u(x) <= u(x + t e_theta) for |theta| <= cone (default theta0).

    Both points lie in the sector at radius <= R - margin and the segment
    stays inside.
    """
    th0, R = _sector_data(u)
    cone = th0 if cone is None else cone
    rmax = R - margin
    rng = np.random.default_rng(seed)
    worst = -np.inf
    used = 0
    for _ in range(20 * n):
        if used >= n:
            break
        ra = rng.uniform(0.05, rmax)
        ta = rng.uniform(-th0, th0) * 0.98
        a = np.array([ra * math.cos(ta), ra * math.sin(ta)])
        d = rng.uniform(-cone, cone)
        t = rng.uniform(0.05, rmax)
        b = a + t * np.array([math.cos(d), math.sin(d)])
        if np.hypot(*b) > rmax or not _segment_inside(th0, a, b):
            continue
        va, vb = u.evaluate(np.array([a, b]))
        worst = max(worst, float(va - vb))
        used += 1
    return CheckResult(worst <= tol, worst,
                       f"max u(x) - u(x + t e) over {used} segments, r <= {rmax:g}, |theta| <= {cone:.4g}")


def translation_diagnostics(u: Field, tol=1e-3) -> dict:
    """Variants of check (f) that separate its two failure sources.

    ``core`` keeps both points in r <= R/4, where the truncation at the arc
    is negligible; ``core_convex`` also restricts the directions to
    |theta| <= min(theta0, pi - theta0), the cone for which Omega + t e lies
    inside Omega.
    """
    th0, R = _sector_data(u)
    return {
        "core": check_translation(u, tol, margin=0.75 * R),
        "core_convex": check_translation(u, tol, margin=0.75 * R, cone=min(th0, math.pi - th0)),
    }


def check_nonnegative(u: Field, tol=1e-9):
    m = float(u.values.min())
    return CheckResult(m >= -tol, -m, "-min u")


def verify_minimal_properties(u: Field) -> dict:
    """Checks (a)-(g) on a sector field; returns name -> CheckResult."""
    _sector_data(u)
    return {
        "a_symmetry": check_symmetry(u),
        "b_bisector_max": check_bisector_max(u),
        "c_radial_derivative": check_radial_derivative(u),
        "d_log_upper": check_log_upper(u),
        "e_lower_bound": check_lower_bound(u),
        "f_translation": check_translation(u),
        "g_nonnegative": check_nonnegative(u),
    }


def concavity_report(u: Field) -> dict:
    """Largest positive second angular difference per ring (reported, not checked)."""
    worst = 0.0
    where = None
    for ring in u.mesh.info["rings"]:
        p = u.mesh.nodes[ring]
        v = u.values[ring]
        if len(v) < 3 or v.max() <= 1e-12:
            continue
        th = np.unwrap(np.arctan2(p[:, 1], p[:, 0]))
        h1 = np.diff(th)
        d = np.diff(v) / h1
        second = np.diff(d) / (0.5 * (h1[1:] + h1[:-1]))
        k = int(np.argmax(second))
        if second[k] > worst:
            worst = float(second[k])
            where = float(np.hypot(*p[0]))
    return {"max_second_difference": worst, "radius": where, "concave": worst <= 1e-8}


# ---------------------------------------------------------------------------
# non-uniqueness family


@dataclass(frozen=True)
class FamilyParams:
    mu_minus: float = 0.0
    mu_plus: float = 0.0

    def validate(self, alpha):
        if self.mu_minus < 0 or self.mu_plus < 0:
            raise InvalidSpecError("mu coefficients must be nonnegative")
        if alpha >= 1.0 and self.mu_minus > 0:
            raise InvalidSpecError("mu_minus > 0 needs a reentrant sector (alpha < 1)")


@dataclass
class FamilyMember:
    params: FamilyParams
    v: Field
    alpha: float

    def harmonic(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(p[:, 0], p[:, 1])
        th = np.arctan2(p[:, 1], p[:, 0])
        return harmonic_part(self.params, self.alpha, r, th)

    def evaluate(self, points) -> np.ndarray:
        """phi_mu = H_mu + v^mu."""
        return self.harmonic(points) + self.v.evaluate(points)


def harmonic_part(params, alpha, r, th):
    out = params.mu_plus * eval_singular_polar(alpha, "S", r, th)
    if params.mu_minus:
        out = out + params.mu_minus * eval_singular_polar(alpha, "S*", r, th)
    return out


def family_mu(theta0, params: FamilyParams, R=20.0, h=0.1, beta=None, opts=None,
              mesh: Optional[Mesh] = None) -> FamilyMember:
    """Solve -Lap v = e^{-H_mu} e^{-v} on Omega_R, v = 0 on the boundary."""
    alpha = math.pi / (2 * theta0)
    params.validate(alpha)
    mesh = mesh if mesh is not None else mesh_sector(SectorSpec(theta0, R, h, beta))
    p = mesh.nodes
    r = np.hypot(p[:, 0], p[:, 1])
    th = np.arctan2(p[:, 1], p[:, 0])
    W = np.empty(mesh.n_nodes)
    at0 = r == 0
    with np.errstate(divide="ignore"):
        W[~at0] = np.exp(-harmonic_part(params, alpha, r[~at0], th[~at0]))
    # H_mu is +inf at the corner when mu_minus > 0, and 0 otherwise
    W[at0] = 0.0 if params.mu_minus > 0 else 1.0
    v, _ = solve_semilinear(mesh, W, opts=opts)
    v.name = "v_mu"
    return FamilyMember(params, v, alpha)


def family_checks(member: FamilyMember, u: Field, tol=1e-6) -> dict:
    """Nodal 0 <= v <= u_R and H <= phi_mu <= H + u_R (corner node excluded)."""
    if member.v.mesh is not u.mesh:
        raise InvalidSpecError("family member and u_R must share a mesh")
    v = member.v.values
    p = u.mesh.nodes
    away = np.hypot(p[:, 0], p[:, 1]) > 0
    H = member.harmonic(p[away])
    phi = H + v[away]
    low = float(-v.min())
    high = float((v - u.values).max())
    return {
        "v_nonnegative": CheckResult(low <= tol, low, "-min v"),
        "v_below_uR": CheckResult(high <= tol, high, "max v - u_R"),
        "H_below_phi": CheckResult(float((H - phi).max()) <= tol, float((H - phi).max()), "max H - phi"),
        "phi_below_H_plus_uR": CheckResult(float((phi - H - u.values[away]).max()) <= tol,
                                           float((phi - H - u.values[away]).max()), "max phi - H - u_R"),
    }
