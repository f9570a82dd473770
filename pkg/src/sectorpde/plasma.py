"""Plasma equilibria -Lap phi = eps^-2 e^{phi_e - phi} on a polygon with phi = 0 on the boundary.

Masses, singular coefficients at the reentrant corner, epsilon sweeps and
the comparison of the rescaled solution with sector minimal solutions.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .discretization import Field, Operator, assemble_operator
from .errors import (DivergedError, InvalidSpecError, PreconditionError, SectorPDEError)
from .geometry import Mesh, PolygonSpec, _point_segment_distance, mesh_polygon
from .nonlinear_solve import SolveOptions, SolveReport, solve_semilinear
from .singular import SingularBasis, SingularityEstimate, extract_lambda_cutoff, extract_lambda_fit

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
LAYER_FACTOR = 0.1
# RAYFIT window in units of epsilon
FIT_WINDOW = (0.02, 0.2)


@dataclass
class PlasmaCase:
    domain: PolygonSpec
    epsilon: float
    phi_e: Optional[Callable]
    field: Field
    weight: np.ndarray
    mass: float
    mass_flux: float
    report: SolveReport
    lam: Optional[SingularityEstimate] = None
    lam_dual: Optional[SingularityEstimate] = None
    layer_width: Optional[float] = None
    notes: list = field(default_factory=list)

    @property
    def kappa(self) -> float:
        return self.epsilon ** -2

    @property
    def alpha(self) -> Optional[float]:
        if self.domain.reentrant_index is None:
            return None
        return self.domain.corner().alpha

    @property
    def resolved(self) -> bool:
        """Boundary-layer width at most eps/3."""
        return self.layer_width is not None and self.layer_width <= self.epsilon / 3.0 * (1 + 1e-12)

    def to_dict(self) -> dict:
        out = {"epsilon": float(self.epsilon), "kappa": float(self.kappa),
               "nodes": int(self.field.mesh.n_nodes), "mass": float(self.mass),
               "mass_flux": float(self.mass_flux), "eps_mass": float(self.epsilon * self.mass),
               "layer_width": None if self.layer_width is None else float(self.layer_width),
               "resolved": bool(self.resolved), "solve": self.report.to_dict(),
               "min_phi": float(self.field.values.min())}
        if self.lam is not None:
            out["lambda"] = self.lam.to_dict()
            out["eps_alpha_lambda"] = float(self.epsilon ** self.alpha * self.lam.value)
        if self.lam_dual is not None:
            out["lambda_dual"] = self.lam_dual.to_dict()
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def plasma_mesh(domain: PolygonSpec, epsilon: float, layer_factor: Optional[float] = LAYER_FACTOR) -> Mesh:
    """Mesh with a boundary layer of width layer_factor*eps and corner grading on scale eps."""
    if layer_factor is None:
        return mesh_polygon(domain)
    kw = {"layer_width": layer_factor * epsilon}
    if domain.reentrant_index is not None:
        kw["corner_scale"] = epsilon
    return mesh_polygon(dataclasses.replace(domain, **kw))


def nodal_potential(mesh: Mesh, phi_e: Optional[Callable]) -> np.ndarray:
    if phi_e is None:
        return np.zeros(mesh.n_nodes)
    v = np.asarray(phi_e(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)
    v = np.broadcast_to(v, (mesh.n_nodes,)).copy()
    if not np.all(np.isfinite(v)):
        raise InvalidSpecError("external potential must be finite on the nodes")
    return v


def volume_mass(op: Operator, u: Field, weight) -> float:
    """Lumped quadrature of W e^{-u}."""
    return float(np.sum(op.mass * weight * np.exp(-u.values)))


def _boundary_edge_frames(mesh: Mesh):
    """Midpoints, outward normals scaled by |e|, and owning triangles of boundary edges."""
    tris = mesh.triangles
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    opp = np.concatenate([tris[:, 2], tris[:, 0], tris[:, 1]])
    owner = np.tile(np.arange(len(tris)), 3)
    n = mesh.n_nodes
    key = np.sort(edges, axis=1)
    code = key[:, 0] * n + key[:, 1]
    bkey = np.sort(mesh.boundary_edges, axis=1)
    bcode = bkey[:, 0] * n + bkey[:, 1]
    order = np.argsort(code)
    pos = order[np.searchsorted(code[order], bcode)]
    a = mesh.nodes[edges[pos, 0]]
    b = mesh.nodes[edges[pos, 1]]
    t = b - a
    nrm = np.column_stack([t[:, 1], -t[:, 0]])
    nrm *= -np.sign((nrm * (mesh.nodes[opp[pos]] - a)).sum(axis=1))[:, None]
    return 0.5 * (a + b), nrm, owner[pos]


def flux_mass(u: Field, method: str = "recovery", k: int = 15) -> float:
    """-(boundary integral of d_n u), independent of the volume quadrature.

    "triangle" uses the gradient of the boundary triangle (first order);
    "recovery" fits a quadratic to the k nearest nodal values around each
    edge midpoint and differentiates it there (second order).
    """
    mesh = u.mesh
    mid, nrm, owner = _boundary_edge_frames(mesh)
    if method == "triangle":
        g = u.gradient()[owner]
    elif method == "recovery":
        _, idx = cKDTree(mesh.nodes).query(mid, k=k)
        d = mesh.nodes[idx] - mid[:, None, :]
        s = np.sqrt((d ** 2).sum(-1)).max(axis=1)[:, None]
        x, y = d[..., 0] / s, d[..., 1] / s
        A = np.stack([np.ones_like(x), x, y, x * x, x * y, y * y], -1)
        AtA = np.einsum("eki,ekj->eij", A, A)
        Atb = np.einsum("eki,ek->ei", A, u.values[idx])
        c = np.linalg.solve(AtA, Atb[..., None])[..., 0]
        g = c[:, 1:3] / s
    else:
        raise ValueError("method must be 'recovery' or 'triangle'")
    return float(-(g * nrm).sum())


def _extract(u: Field, weight, domain: PolygonSpec, epsilon: float, notes: list):
    if domain.reentrant_index is None:
        return None, None
    basis = SingularBasis.from_corner(domain.corner())
    lam = dual = None
    try:
        lam = extract_lambda_fit(u, (FIT_WINDOW[0] * epsilon, FIT_WINDOW[1] * epsilon), basis=basis)
    except SectorPDEError as exc:
        notes.append(f"rayfit: {exc}")
    try:
        dual = extract_lambda_cutoff(u, weight, basis, 0.5 * domain.corner_inradius())
    except SectorPDEError as exc:
        notes.append(f"cutoff dual: {exc}")
    return lam, dual


def _solve_weight(domain, mesh, op, epsilon, W, phi_e, layer_width, opts, extract):
    try:
        u, rep = solve_semilinear(mesh, W, opts=opts, operator=op)
    except DivergedError as exc:
        raise DivergedError(f"{exc}; refine the mesh near the boundary "
                            f"(layer width ~ eps = {epsilon:g})", exc.last, exc.report) from exc
    u.name = "phi"
    notes = []
    lam, dual = _extract(u, W, domain, epsilon, notes) if extract else (None, None)
    return PlasmaCase(domain, float(epsilon), phi_e, u, W, volume_mass(op, u, W), flux_mass(u),
                      rep, lam, dual, layer_width, notes)


def solve_plasma(domain: PolygonSpec, epsilon: float, phi_e: Optional[Callable] = None,
                 layer_factor: Optional[float] = LAYER_FACTOR, mesh: Optional[Mesh] = None,
                 opts: Optional[SolveOptions] = None, extract: bool = True) -> PlasmaCase:
    """Solve with W = eps^-2 e^{phi_e} nodally; phi_e(x, y) is vectorised."""
    if not epsilon > 0:
        raise InvalidSpecError("epsilon must be positive")
    domain.validate()
    if mesh is None:
        mesh = plasma_mesh(domain, epsilon, layer_factor)
        lw = None if layer_factor is None else layer_factor * epsilon
    else:
        lw = mesh.info["spec"].layer_width if "spec" in mesh.info else None
    W = epsilon ** -2 * np.exp(nodal_potential(mesh, phi_e))
    return _solve_weight(domain, mesh, assemble_operator(mesh), epsilon, W, phi_e, lw, opts, extract)


# ---------------------------------------------------------------------------
# epsilon sweeps


@dataclass
class ScalingReport:
    rows: list
    perimeter: float
    alpha: Optional[float]
    mass_slope: Optional[float] = None
    lambda_slope: Optional[float] = None
    eps_mass_limit: Optional[dict] = None
    reference_Lambda: Optional[tuple] = None
    w_trend: Optional[dict] = None
    failures: dict = field(default_factory=dict)

    @property
    def mass_target(self) -> float:
        return SQRT2 * self.perimeter

    def to_dict(self) -> dict:
        return {"rows": self.rows, "perimeter": float(self.perimeter),
                "alpha": None if self.alpha is None else float(self.alpha),
                "mass_target": float(self.mass_target),
                "mass_slope": self.mass_slope, "lambda_slope": self.lambda_slope,
                "eps_mass_limit": self.eps_mass_limit,
                "reference_Lambda": None if self.reference_Lambda is None
                else [float(x) for x in self.reference_Lambda],
                "w_trend": self.w_trend,
                "failures": {str(k): v for k, v in self.failures.items()}}

    COLUMNS = ("epsilon", "mass", "eps_mass", "lambda", "eps_alpha_lambda")

    def table(self) -> list:
        out = []
        for r in self.rows:
            lam = r.get("lambda", {}).get("lambda") if "lambda" in r else None
            out.append([r["epsilon"], r["mass"], r["eps_mass"], lam, r.get("eps_alpha_lambda")])
        return out


def interior_samples(domain: PolygonSpec, n: int = 9, depth: float = 0.15) -> np.ndarray:
    """Grid points at distance >= depth*diameter from the boundary."""
    p = domain.points
    lo, hi = p.min(axis=0), p.max(axis=0)
    g = np.stack(np.meshgrid(np.linspace(lo[0], hi[0], n), np.linspace(lo[1], hi[1], n)), -1).reshape(-1, 2)
    d = np.full(len(g), np.inf)
    for j in range(domain.n):
        d = np.minimum(d, _point_segment_distance(g, p[j], p[(j + 1) % domain.n]))
    inside = _inside_polygon(g, p)
    return g[inside & (d >= depth * domain.diameter())]


def _inside_polygon(pts, poly):
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    for j in range(len(poly)):
        (x1, y1), (x2, y2) = poly[j], poly[(j + 1) % len(poly)]
        cross = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cross & (x < xi)
    return inside


def _fit_slope(x, y):
    x, y = np.log(np.asarray(x)), np.log(np.asarray(y))
    return float(np.polyfit(x, y, 1)[0])


def _sweep_one(args):
    domain, eps, phi_e, layer_factor, opts = args
    try:
        return solve_plasma(domain, eps, phi_e, layer_factor, opts=opts)
    except SectorPDEError as exc:
        return exc


def sweep_eps(domain: PolygonSpec, epsilons: Sequence[float], phi_e: Optional[Callable] = None,
              layer_factor: float = LAYER_FACTOR, opts: Optional[SolveOptions] = None,
              Lambda: Optional[Sequence[float]] = None, jobs: int = 1,
              keep_cases: bool = False):
    """Solve for each epsilon and fit the scaling laws.

    Returns the ScalingReport, plus the list of cases if ``keep_cases``.
    ``Lambda`` is an optional reference bracket from a sector study.
    """
    eps = [float(e) for e in epsilons]
    if len(eps) < 3:
        raise InvalidSpecError("an epsilon sweep needs at least 3 values")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise InvalidSpecError("epsilon list must be strictly decreasing")
    domain.validate()
    tasks = [(domain, e, phi_e, layer_factor, opts) for e in eps]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_one, tasks))
    else:
        results = [_sweep_one(t) for t in tasks]
    alpha = domain.corner().alpha if domain.reentrant_index is not None else None
    rep = ScalingReport(rows=[], perimeter=domain.perimeter(), alpha=alpha,
                        reference_Lambda=None if Lambda is None else tuple(Lambda))
    cases = []
    for e, res in zip(eps, results):
        if isinstance(res, Exception):
            rep.failures[e] = str(res)
            continue
        cases.append(res)
        rep.rows.append(res.to_dict())
    if len(cases) >= 2:
        e_ok = [c.epsilon for c in cases]
        rep.mass_slope = _fit_slope(e_ok, [c.mass for c in cases])
        lams = [c.lam.value for c in cases if c.lam is not None]
        if alpha is not None and len(lams) == len(cases):
            rep.lambda_slope = _fit_slope(e_ok, lams)
        a_prev, a_last = (c.epsilon * c.mass for c in cases[-2:])
        q = cases[-2].epsilon / cases[-1].epsilon
        extra = (q * a_last - a_prev) / (q - 1.0)
        rep.eps_mass_limit = {"richardson": float(extra), "bracket": sorted([float(a_last), float(extra)]),
                              "target": float(rep.mass_target),
                              "relative_error": float(abs(extra - rep.mass_target) / rep.mass_target),
                              "monotone": bool(np.all(np.diff([c.epsilon * c.mass for c in cases]) > 0))}
        pts = interior_samples(domain)
        if len(pts):
            w = np.array([-2.0 * math.log(c.epsilon) - c.field.evaluate(pts) for c in cases])
            d = np.diff(w, axis=0)  # rows ordered by decreasing epsilon
            rep.w_trend = {"points": int(len(pts)),
                           "nondecreasing_as_eps_decreases": bool(np.all(d >= -1e-9)),
                           "nonincreasing_as_eps_decreases": bool(np.all(d <= 1e-9)),
                           "min_step": float(d.min()), "max_step": float(d.max())}
    return (rep, cases) if keep_cases else rep


# ---------------------------------------------------------------------------
# blow-up comparison with sector minimal solutions


def _sector_field_data(u: Field):
    info = u.mesh.info
    if info.get("kind") != "sector":
        raise PreconditionError("blow-up comparison needs sector fields")
    return info["theta0"], info["radius"]


def blowup_compare(case: PlasmaCase, lower: Field, upper: Field,
                   Lambda: Optional[Sequence[float]] = None, window: float = 4.0,
                   n_r: int = 16, n_th: int = 15, tol: float = 0.05) -> dict:
    """Compare v(xi) = phi_eps(eps xi) with u_R (lower) and u_R' (upper) on |xi| <= window.

    ``lower`` must live on a sector of radius at most inradius/eps so that
    its rescaled domain fits in the polygon.
    """
    dom = case.domain
    if dom.reentrant_index is None:
        raise PreconditionError("blow-up comparison needs a reentrant corner")
    cg = dom.corner()
    eps = case.epsilon
    th_lo, R_lo = _sector_field_data(lower)
    th_up, R_up = _sector_field_data(upper)
    if abs(th_lo - cg.theta0) > 1e-9 or abs(th_up - cg.theta0) > 1e-9:
        raise PreconditionError("sector opening does not match the corner")
    inr = dom.corner_inradius()
    if R_lo * eps > inr * (1 + 1e-12):
        raise PreconditionError(f"lower sector radius {R_lo:g} exceeds inradius/eps = {inr / eps:g}")
    basis = SingularBasis.from_corner(cg)
    r = np.linspace(window / n_r, window, n_r)
    th = cg.theta0 * np.linspace(-0.95, 0.95, n_th)
    rr, tt = np.meshgrid(r, th, indexing="ij")
    xi = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
    x = basis.point(eps * rr.ravel(), tt.ravel())
    rx = np.hypot(xi[:, 0], xi[:, 1])
    keep_lo = rx <= R_lo
    keep_up = rx <= R_up
    inside = case.field.mesh.locate(x)[0] >= 0
    v = np.full(len(x), np.nan)
    v[inside] = case.field.evaluate(x[inside])
    m_lo = keep_lo & inside
    m_up = keep_up & inside
    # samples on the arc may sit just outside the polygonal arc of the mesh
    lo_excess = float(np.max(lower.evaluate(xi[m_lo], snap=0.01 * R_lo) - v[m_lo])) if m_lo.any() else None
    up_excess = float(np.max(v[m_up] - upper.evaluate(xi[m_up], snap=0.01 * R_up))) if m_up.any() else None
    out = {"epsilon": float(eps), "window": float(window), "R_lower": float(R_lo),
           "R_upper": float(R_up),
           "upper_covers_domain": bool(R_up * eps >= dom.corner_circumradius() * (1 - 1e-12)),
           "samples": int(len(x)), "skipped_lower": int((~m_lo).sum()),
           "skipped_upper": int((~m_up).sum()),
           "lower_excess": lo_excess, "upper_excess": up_excess,
           "lower_ok": lo_excess is not None and lo_excess <= tol,
           "upper_ok": up_excess is not None and up_excess <= tol, "tol": tol}
    if case.lam is not None:
        val = eps ** cg.alpha * case.lam.value
        out["eps_alpha_lambda"] = float(val)
        if Lambda is not None:
            lo, hi = min(Lambda), max(Lambda)
            gap = max(lo - val, val - hi, 0.0)
            out["Lambda_bracket"] = [float(lo), float(hi)]
            out["Lambda_distance"] = float(gap)
            out["Lambda_relative_distance"] = float(gap / abs(hi))
    return out


# ---------------------------------------------------------------------------
# external-potential sandwich


def sandwich_check(domain: PolygonSpec, kappa: float, phi_e: Optional[Callable],
                   layer_factor: float = LAYER_FACTOR, rtol: float = 1e-6,
                   opts: Optional[SolveOptions] = None) -> dict:
    """Three solves with weights kappa e^{min phi_e}, kappa e^{phi_e}, kappa e^{max phi_e}.

    Checks M and lambda are ordered accordingly.  All solves share one mesh.
    """
    if not kappa > 0:
        raise InvalidSpecError("kappa must be positive")
    domain.validate()
    eps = kappa ** -0.5
    mesh = plasma_mesh(domain, eps, layer_factor)
    op = assemble_operator(mesh)
    pot = nodal_potential(mesh, phi_e)
    lo, hi = float(pot.min()), float(pot.max())
    lw = layer_factor * eps if layer_factor is not None else None
    labels = ("min", "phi_e", "max")
    weights = (np.full(mesh.n_nodes, kappa * math.exp(lo)), kappa * np.exp(pot),
               np.full(mesh.n_nodes, kappa * math.exp(hi)))
    cases, failures = {}, {}
    for lab, W in zip(labels, weights):
        try:
            cases[lab] = _solve_weight(domain, mesh, op, eps, W, phi_e, lw, opts, True)
        except SectorPDEError as exc:
            failures[lab] = str(exc)
    out = {"kappa": float(kappa), "phi_min": lo, "phi_max": hi, "nodes": int(mesh.n_nodes),
           "rtol": rtol, "failures": failures}
    if len(cases) < 3:
        out["complete"] = False
        return out
    out["complete"] = True

    def ordered(a, b, c):
        s = max(abs(a), abs(b), abs(c))
        return bool(a <= b + rtol * s and b <= c + rtol * s)

    M = [cases[k].mass for k in labels]
    out["mass"] = M
    out["mass_ordered"] = ordered(*M)
    if domain.reentrant_index is not None:
        lams = [None if cases[k].lam is None else cases[k].lam.value for k in labels]
        out["lambda"] = lams
        out["lambda_ordered"] = None if None in lams else ordered(*lams)
        duals = [None if cases[k].lam_dual is None else cases[k].lam_dual.value for k in labels]
        out["lambda_dual"] = duals
        out["lambda_dual_ordered"] = None if None in duals else ordered(*duals)
    return out
