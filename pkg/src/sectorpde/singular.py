"""Corner singular functions and extraction of the singular coefficient.

Near a corner of opening 2*theta0 the solution behaves like
lambda * r^alpha cos(alpha theta), alpha = pi / (2 theta0).  Two estimators:

* DUAL: lambda = int f P_s^R, with P_s^R the dual singular function that
  vanishes on the boundary of the truncated sector Omega_R;
* RAYFIT: least squares on samples along rays inside a radial window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import roots_jacobi

from .discretization import Field, as_nodal
from .errors import (DomainError, FitError, PreconditionError, SingularEvaluationError,
                     UnsupportedError)

DUAL = "DUAL"
RAYFIT = "RAYFIT"


@dataclass(frozen=True)
class SingularBasis:
    alpha: float
    corner: tuple = (0.0, 0.0)
    axis: float = 0.0  # polar angle of the bisector

    @classmethod
    def from_theta0(cls, theta0, corner=(0.0, 0.0), axis=0.0):
        return cls(alpha=math.pi / (2.0 * theta0), corner=tuple(map(float, corner)),
                   axis=float(axis))

    @classmethod
    def from_corner(cls, cg):
        return cls.from_theta0(cg.theta0, tuple(cg.vertex), cg.axis)

    @property
    def theta0(self) -> float:
        return math.pi / (2.0 * self.alpha)

    def polar(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float)) - np.asarray(self.corner)
        r = np.hypot(p[:, 0], p[:, 1])
        if self.axis == 0.0:
            th = np.arctan2(p[:, 1], p[:, 0])
        else:
            th = np.angle((p[:, 0] + 1j * p[:, 1]) * np.exp(-1j * self.axis))
        return r, th

    def point(self, r, theta):
        r = np.asarray(r, dtype=float)
        a = np.asarray(theta, dtype=float) + self.axis
        return np.stack([self.corner[0] + r * np.cos(a), self.corner[1] + r * np.sin(a)], -1)


@dataclass
class SingularityEstimate:
    value: float
    method: str
    bracket: tuple
    meta: dict = field(default_factory=dict)

    @property
    def lam(self) -> float:
        return self.value

    def to_dict(self) -> dict:
        return {"lambda": float(self.value), "method": self.method,
                "bracket": [float(self.bracket[0]), float(self.bracket[1])],
                **{k: v for k, v in self.meta.items()}}


def _polar_values(alpha, r, th, kind):
    if kind == "S":
        return r ** alpha * np.cos(alpha * th)
    if kind in ("S*", "Sstar", "dual"):
        if np.any(r == 0):
            raise SingularEvaluationError("S* is singular at the corner")
        return r ** (-alpha) * np.cos(alpha * th) / math.pi
    raise ValueError(f"unknown singular function kind {kind!r}")


def eval_singular(basis: SingularBasis, kind: str, points) -> np.ndarray:
    """S = r^a cos(a th) or S* = r^-a cos(a th) / pi at corner-local polar coordinates."""
    r, th = basis.polar(points)
    return _polar_values(basis.alpha, r, th, kind)


def eval_singular_polar(alpha, kind, r, theta):
    return _polar_values(alpha, np.asarray(r, float), np.asarray(theta, float), kind)


def eval_dual_ps(basis: SingularBasis, R: float, points) -> np.ndarray:
    """P_s^R = (r^-a - (r/R^2)^a) cos(a th) / pi, zero on r = R."""
    r, th = basis.polar(points)
    if np.any(r > R * (1 + 1e-12)):
        raise DomainError("P_s^R is only defined for r <= R")
    if np.any(r == 0):
        raise SingularEvaluationError("P_s^R is singular at the corner")
    return _dual_ps(basis.alpha, R, r, th)


def _dual_ps(alpha, R, r, th):
    return (r ** (-alpha) - (r / R ** 2) ** alpha) * np.cos(alpha * th) / math.pi


def sector_dual_integral(alpha, R):
    """Closed form of int_{Omega_R} P_s^R."""
    return 4.0 * R ** (2 - alpha) / (math.pi * (4.0 - alpha ** 2))


# ---------------------------------------------------------------------------
# quadrature on triangles, collapsed towards one vertex


@lru_cache(maxsize=64)
def _collapsed_rule(n, b):
    """Nodes/weights on [0,1]^2 for int_0^1 int_0^1 s^b g(s, t) dt ds."""
    xs, ws = roots_jacobi(n, 0.0, b)
    s = 0.5 * (xs + 1.0)
    ws = ws / 2.0 ** (b + 1.0)
    xt, wt = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (xt + 1.0)
    wt = 0.5 * wt
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    return S.ravel(), T.ravel(), W.ravel()


def _integrate(mesh, tris, apex, integrand, n, singular_alpha=None):
    """Sum over ``tris`` of int integrand, with collapsed Gauss rules.

    ``apex[k]`` is the local vertex collapsed to (s=0).  If
    ``singular_alpha`` is set the s-rule carries the weight s^(1-alpha) and
    the integrand is multiplied by s^alpha, which removes an r^-alpha
    singularity sitting at the apex.
    """
    if len(tris) == 0:
        return 0.0
    t = mesh.triangles[tris]
    k = np.asarray(apex)
    i0 = t[np.arange(len(t)), k]
    i1 = t[np.arange(len(t)), (k + 1) % 3]
    i2 = t[np.arange(len(t)), (k + 2) % 3]
    p0, p1, p2 = mesh.nodes[i0], mesh.nodes[i1], mesh.nodes[i2]
    area2 = np.abs((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                   - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
    b = 1.0 if singular_alpha is None else 1.0 - singular_alpha
    S, T, W = _collapsed_rule(n, b)
    l0 = 1.0 - S
    l1 = S * (1.0 - T)
    l2 = S * T
    total = 0.0
    chunk = max(1, 400000 // len(S))
    for c in range(0, len(t), chunk):
        sl = slice(c, c + chunk)
        x = (p0[sl, None, :] * l0[None, :, None] + p1[sl, None, :] * l1[None, :, None]
             + p2[sl, None, :] * l2[None, :, None])
        bary = (l0, l1, l2)
        vals = integrand(x, (i0[sl], i1[sl], i2[sl]), bary, tris[sl])
        if singular_alpha is not None:
            vals = vals * S[None, :] ** singular_alpha
        total += float(np.sum(area2[sl] * (vals @ W)))
    return total


def _corner_split(mesh, basis, tris=None):
    """Split triangles into (corner-touching, apex index) and the rest."""
    tris = np.arange(mesh.n_triangles) if tris is None else np.asarray(tris)
    c = np.asarray(basis.corner)
    d = np.hypot(*(mesh.nodes[mesh.triangles[tris]] - c).transpose(2, 0, 1))
    at = d < 1e-12
    has = at.any(axis=1)
    return tris[has], np.argmax(at[has], axis=1), tris[~has], np.zeros((~has).sum(), int)


def _p1(values, idx, bary):
    i0, i1, i2 = idx
    l0, l1, l2 = bary
    return (values[i0][:, None] * l0[None, :] + values[i1][:, None] * l1[None, :]
            + values[i2][:, None] * l2[None, :])


def integrate_dual(mesh, basis, R, nodal, n=6, tris=None):
    """int nodal_P1 * P_s^R over the mesh (or a subset of triangles)."""
    alpha = basis.alpha
    ct, ca, ft, fa = _corner_split(mesh, basis, tris)

    def fn(x, idx, bary, _):
        r, th = basis.polar(x.reshape(-1, 2))
        ps = _dual_ps(alpha, R, r, th).reshape(x.shape[:2])
        return _p1(nodal, idx, bary) * ps

    return (_integrate(mesh, ft, fa, fn, n)
            + _integrate(mesh, ct, ca, fn, n, singular_alpha=alpha))


def _check_reentrant(basis):
    if basis.alpha >= 1.0:
        raise UnsupportedError("no dual singularity for salient corners (alpha >= 1)")


def extract_lambda_dual(u: Field, weight=1.0, R: Optional[float] = None,
                        basis: Optional[SingularBasis] = None, order: int = 6
                        ) -> SingularityEstimate:
    """Lambda_R = int_{Omega_R} W e^{-u} P_s^R on a sector mesh.

    The bracket comes from quadrature orders ``order`` and ``2*order``.
    """
    mesh = u.mesh
    if basis is None:
        basis = SingularBasis.from_theta0(mesh.info["theta0"])
    if R is None:
        R = mesh.info["radius"]
    _check_reentrant(basis)
    f = as_nodal(mesh, weight) * np.exp(-u.values)
    lo = integrate_dual(mesh, basis, R, f, n=order)
    hi = integrate_dual(mesh, basis, R, f, n=2 * order)
    return SingularityEstimate(hi, DUAL, (min(lo, hi), max(lo, hi)),
                               {"radius": float(R), "order": int(2 * order)})


# ---------------------------------------------------------------------------
# cutoff variant for polygons


def quintic_cutoff(r, B):
    """chi = 1 on r <= B/2, 0 on r >= B, C^2 quintic in between.

    Returns (chi, chi', chi'') as functions of r.
    """
    r = np.asarray(r, dtype=float)
    t = np.clip((r - 0.5 * B) / (0.5 * B), 0.0, 1.0)
    inside = (t > 0) & (t < 1)
    chi = 1.0 - (10 * t ** 3 - 15 * t ** 4 + 6 * t ** 5)
    d1 = np.where(inside, -(30 * t ** 2 - 60 * t ** 3 + 30 * t ** 4) / (0.5 * B), 0.0)
    d2 = np.where(inside, -(60 * t - 180 * t ** 2 + 120 * t ** 3) / (0.5 * B) ** 2, 0.0)
    return chi, d1, d2


def extract_lambda_cutoff(u: Field, weight, basis: SingularBasis, B: float,
                          order: int = 6) -> SingularityEstimate:
    """lambda = int (chi W e^{-u} - 2 grad chi . grad u - u Lap chi) P_s^{2B}.

    chi is the quintic cutoff on [B/2, B]; the tangent sub-sector of radius
    2B must lie inside the domain.
    """
    _check_reentrant(basis)
    mesh = u.mesh
    R = 2.0 * B
    alpha = basis.alpha
    f = as_nodal(mesh, weight) * np.exp(-u.values)
    grad = u.gradient()
    c = np.asarray(basis.corner)
    rmin = np.hypot(*(mesh.nodes[mesh.triangles] - c).transpose(2, 0, 1)).min(axis=1)
    sel = np.flatnonzero(rmin < B)
    ct, ca, ft, fa = _corner_split(mesh, basis, sel)

    def fn(x, idx, bary, tri):
        flat = x.reshape(-1, 2)
        r, th = basis.polar(flat)
        ps = _dual_ps(alpha, R, r, th).reshape(x.shape[:2])
        ps = np.where(r.reshape(x.shape[:2]) <= R, ps, 0.0)
        chi, d1, d2 = (a.reshape(x.shape[:2]) for a in quintic_cutoff(r, B))
        rr = np.maximum(r.reshape(x.shape[:2]), 1e-300)
        lap = d2 + d1 / rr
        dx = (x[..., 0] - c[0]) / rr
        dy = (x[..., 1] - c[1]) / rr
        gdot = d1 * (dx * grad[tri, 0][:, None] + dy * grad[tri, 1][:, None])
        uu = _p1(u.values, idx, bary)
        return (chi * _p1(f, idx, bary) - 2.0 * gdot - uu * lap) * ps

    vals = []
    for n in (order, 2 * order):
        vals.append(_integrate(mesh, ft, fa, fn, n)
                    + _integrate(mesh, ct, ca, fn, n, singular_alpha=alpha))
    lo, hi = vals
    return SingularityEstimate(hi, DUAL, (min(lo, hi), max(lo, hi)),
                               {"radius": float(R), "cutoff": float(B), "order": int(2 * order)})


# ---------------------------------------------------------------------------
# ray fitting


def default_rays(theta0, n=7):
    """Interior ray angles, symmetric about the bisector."""
    return tuple(theta0 * np.linspace(-0.75, 0.75, n))


def _fit_once(u, basis, rmin, rmax, rays, n_samples, snap):
    r = np.geomspace(rmin, rmax, n_samples)
    rows, ys = [], []
    nr = len(rays)
    for j, th in enumerate(rays):
        pts = basis.point(r, np.full_like(r, th))
        y = u.evaluate(pts, snap=snap)
        A = np.zeros((len(r), 1 + 2 * nr))
        A[:, 0] = r ** basis.alpha * np.cos(basis.alpha * th)
        A[:, 1 + 2 * j] = r
        A[:, 2 + 2 * j] = r ** 2
        rows.append(A)
        ys.append(y)
    A = np.vstack(rows)
    y = np.concatenate(ys)
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    cond = np.linalg.cond(As)
    if not cond <= 1e8:
        raise FitError(f"ray fit is ill-conditioned (cond={cond:.3g})")
    coef, *_ = np.linalg.lstsq(As, y, rcond=None)
    coef = coef / scale
    return float(coef[0]), float(cond)


def extract_lambda_fit(u: Field, window: Sequence[float], rays: Optional[Sequence[float]] = None,
                       basis: Optional[SingularBasis] = None, n_samples: int = 40,
                       snap: float = 0.0) -> SingularityEstimate:
    """Fit u ~ lambda S + sum_rays (a_j r + b_j r^2) on rays in ``window``.

    Each ray carries its own regular-part coefficients, so lambda is the
    only shared unknown.  The bracket comes from scaling the window by 0.75
    and 1.25.
    """
    mesh = u.mesh
    if basis is None:
        basis = SingularBasis.from_theta0(mesh.info["theta0"])
    rmin, rmax = map(float, window)
    if not 0 < rmin < rmax:
        raise PreconditionError("window must satisfy 0 < r_min < r_max")
    rays = default_rays(basis.theta0) if rays is None else tuple(rays)
    if any(abs(t) >= basis.theta0 for t in rays):
        raise PreconditionError("rays must lie strictly inside the sector")
    tri, _ = mesh.locate(basis.point(np.array([rmin]), np.array([0.0])))
    if tri[0] >= 0 and rmin <= 2.0 * mesh.diameters[tri[0]]:
        raise PreconditionError("r_min must exceed twice the local mesh size")
    lam, cond = _fit_once(u, basis, rmin, rmax, rays, n_samples, snap)
    others = [lam]
    for f in (0.75, 1.25):
        others.append(_fit_once(u, basis, rmin * f, rmax * f, rays, n_samples, snap)[0])
    return SingularityEstimate(lam, RAYFIT, (min(others), max(others)),
                               {"window": [rmin, rmax], "rays": len(rays), "cond": cond})
