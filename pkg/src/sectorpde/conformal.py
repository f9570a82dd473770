"""Supersolution on the split plane built through a Moebius map to a disk.

The upper half-plane z1 is sent onto the disk D2 (centre -i/2, radius 1/2)
by Phi(z) = 1/(z + i), with inverse Psi(z) = 1/z - i.  Log-density fields
transform as w2 = log|Psi'| + w1 o Psi.  On D2 the truncated mixed problem

    Lap w2 = 4 e^{2 w2},  w2 = min(k, -log|z2|^2) on the left half-circle,
    d_n w2 = -2 on the right half-circle

is solved in the variable u = -2 w2 (so -Lap u = 8 e^{-u}, Neumann +4),
and phi*(x) = -2 w1(x / sqrt 8).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .discretization import Field, assemble_operator
from .errors import DomainError, MapSingularityError
from .geometry import DiskSpec, Mesh, mesh_disk_mixed
from .nonlinear_solve import SolveOptions, solve_semilinear

DISK_CENTER = (0.0, -0.5)
DISK_RADIUS = 0.5
SCALE = math.sqrt(8.0)
K_SCHEDULE = (0, 2, 4, 6)
DIRICHLET_TAG = 1
NEUMANN_TAG = 2


def _as_complex(z):
    z = np.asarray(z)
    if z.dtype.kind == "c":
        return z
    if z.ndim >= 1 and z.shape[-1] == 2:
        return z[..., 0] + 1j * z[..., 1]
    return z.astype(complex)


@dataclass(frozen=True)
class ConformalPair:
    """Phi(z) = 1/(z + i) and its inverse Psi(z) = 1/z - i."""

    pole_tol: float = 1e-300

    def phi(self, z):
        z = _as_complex(z)
        d = z + 1j
        if np.any(np.abs(d) <= self.pole_tol):
            raise MapSingularityError("Phi has a pole at z = -i")
        return 1.0 / d

    def psi(self, z):
        z = _as_complex(z)
        if np.any(np.abs(z) <= self.pole_tol):
            raise MapSingularityError("Psi has a pole at z = 0")
        return 1.0 / z - 1j

    def log_abs_dphi(self, z):
        z = _as_complex(z)
        if np.any(np.abs(z + 1j) <= self.pole_tol):
            raise MapSingularityError("Phi has a pole at z = -i")
        return -2.0 * np.log(np.abs(z + 1j))

    def log_abs_dpsi(self, z):
        z = _as_complex(z)
        if np.any(np.abs(z) <= self.pole_tol):
            raise MapSingularityError("Psi has a pole at z = 0")
        return -2.0 * np.log(np.abs(z))


MAPS = ConformalPair()


def transform_field(w: Callable, direction: str) -> Callable:
    """Carry a log-density between the planes.

    direction "1to2": w2(z2) = log|Psi'(z2)| + w1(Psi(z2));
    direction "2to1": w1(z1) = log|Phi'(z1)| + w2(Phi(z1)).
    ``w`` takes complex arrays.
    """
    if direction == "1to2":
        return lambda z: MAPS.log_abs_dpsi(z) + w(MAPS.psi(z))
    if direction == "2to1":
        return lambda z: MAPS.log_abs_dphi(z) + w(MAPS.phi(z))
    raise ValueError("direction must be '1to2' or '2to1'")


def disk_datum(k, z2):
    """g2^k = min(k, -log|z2|^2)."""
    z2 = _as_complex(z2)
    with np.errstate(divide="ignore"):
        return np.minimum(k, -np.log(np.abs(z2) ** 2))


def disk_spec(h=0.02, k_ref=2.0) -> DiskSpec:
    """D2 with grading towards z2 = 0 (scale e^{-k_ref/2}) and towards -i."""
    return DiskSpec(center=DISK_CENTER, radius=DISK_RADIUS, split=True, mesh_size=h,
                    refine_points=(((0.0, 0.0), math.exp(-k_ref / 2.0)), ((0.0, -1.0), 0.1)))


def _disk_mesh(h):
    return mesh_disk_mixed(disk_spec(h))


def solve_disk_truncated(k, h=0.02, mesh: Optional[Mesh] = None, opts=None, initial=None,
                         operator=None) -> Field:
    """w2^k on D2, returned as a Field in the w variable."""
    if k < 0:
        raise ValueError("truncation level k must be >= 0")
    mesh = mesh if mesh is not None else _disk_mesh(h)

    def g(x, y):
        return -2.0 * disk_datum(k, x + 1j * y)

    u, _ = solve_semilinear(mesh, weight=8.0, dirichlet={DIRICHLET_TAG: g},
                            neumann={NEUMANN_TAG: 4.0}, opts=opts, operator=operator,
                            initial=None if initial is None else -2.0 * np.asarray(initial))
    return Field(mesh, -0.5 * u.values, f"w2_k{k:g}")


@dataclass
class PhiStarEvaluator:
    """phi* on the closed upper half-plane from the disk fields w2^k."""

    fields: dict  # k -> Field (w2^k)
    mesh: Mesh
    k: float
    m: float  # min nodal w2^0
    snap: float = 1e-3

    def _w1_on_disk(self, w2: Field):
        # d = w2 + log|z2|^2 = w1 o Psi, interpolated instead of w2 so that
        # the nodal bound d <= 0 carries over to every point
        z = self.mesh.nodes[:, 0] + 1j * self.mesh.nodes[:, 1]
        with np.errstate(divide="ignore"):
            d = w2.values + np.log(np.abs(z) ** 2)
        return d

    def evaluate(self, points, k: Optional[float] = None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(pts[:, 1] < -1e-12):
            raise DomainError("phi* is defined on the closed upper half-plane")
        kk = self.k if k is None else k
        w2 = self.fields[kk]
        z1 = (pts[:, 0] + 1j * pts[:, 1]) / SCALE
        z2 = MAPS.phi(z1)
        q = np.column_stack([z2.real, z2.imag])
        d = self._w1_on_disk(w2)
        tri, bary = self.mesh.locate(q)
        out = np.empty(len(pts))
        finite_d = np.isfinite(d)
        ok = tri >= 0
        for i in np.flatnonzero(ok):
            vs = self.mesh.triangles[tri[i]]
            if finite_d[vs].all():
                out[i] = -2.0 * float(d[vs] @ bary[i])
            else:
                wv = float(w2.values[vs] @ bary[i])
                out[i] = -2.0 * (wv + math.log(abs(z2[i]) ** 2))
        miss = np.flatnonzero(~ok)
        if len(miss):
            dd = Field(self.mesh, np.where(finite_d, d, 0.0)).evaluate(q[miss], snap=self.snap)
            out[miss] = -2.0 * dd
        return out

    def evaluate_symmetric(self, points, k=None):
        """Even reflection across the real axis: values on the slit plane."""
        pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        pts[:, 1] = np.abs(pts[:, 1])
        return self.evaluate(pts, k)

    def upper_bound(self, points) -> np.ndarray:
        """2 log(1 + r sin(th)/sqrt 2 + r^2/8) - 2 m."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r2 = (pts ** 2).sum(axis=1)
        return 2.0 * np.log(1.0 + pts[:, 1] / math.sqrt(2.0) + r2 / 8.0) - 2.0 * self.m


@dataclass
class PhiStarResult:
    values: np.ndarray
    k: float
    delta: np.ndarray
    evaluator: PhiStarEvaluator
    history: dict = field(default_factory=dict)  # k -> sampled values


def build_phistar(points=None, ks: Sequence[float] = K_SCHEDULE, h: float = 0.02,
                  stop_tol: float = 1e-3, opts: Optional[SolveOptions] = None,
                  run_all: bool = True) -> PhiStarResult:
    """Solve the k schedule on one disk mesh and sample phi* at ``points``.

    ``delta`` is the sampled change from the previous level.  With
    ``run_all=False`` the schedule stops once that change is below
    ``stop_tol``.
    """
    ks = tuple(sorted(ks))
    k_ref = next((k for k in ks if k > 0), 2.0)
    mesh = mesh_disk_mixed(disk_spec(h, k_ref))
    op = assemble_operator(mesh)
    if points is not None:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(pts[:, 1] < -1e-12):
            raise DomainError("phi* sample points must lie in the closed upper half-plane")
    fields = {}
    history = {}
    prev = None
    delta = None
    ev = None
    for k in ks:
        w2 = solve_disk_truncated(k, mesh=mesh, opts=opts, operator=op,
                                  initial=None if prev is None else prev.values)
        fields[k] = w2
        prev = w2
        m = float(fields[ks[0]].values.min())
        ev = PhiStarEvaluator(fields, mesh, k, m)
        if points is not None:
            vals = ev.evaluate(pts)
            if history:
                delta = vals - history[list(history)[-1]]
            history[k] = vals
            if not run_all and delta is not None and np.abs(delta).max() < stop_tol:
                break
    vals = history[ev.k] if points is not None else None
    if delta is None and points is not None:
        delta = np.full(len(pts), np.nan)
    return PhiStarResult(vals, ev.k, delta, ev, history)


def phistar_checks(result: PhiStarResult, points=None, tol=1e-6) -> dict:
    """Nodal monotonicity in k, the supersolution bound w2^k <= -log|z2|^2,
    and (given the sample ``points``) the logarithmic upper bound on phi*."""
    ev = result.evaluator
    ks = sorted(ev.fields)
    z = ev.mesh.nodes[:, 0] + 1j * ev.mesh.nodes[:, 1]
    with np.errstate(divide="ignore"):
        cap = -np.log(np.abs(z) ** 2)
    steps = [float((ev.fields[a].values - ev.fields[b].values).max()) for a, b in zip(ks, ks[1:])]
    over = max(float(np.max(ev.fields[k].values - cap)) for k in ks)
    out = {"monotone_in_k": {"passed": bool(max(steps, default=0.0) <= tol),
                             "residual": max(steps, default=0.0)},
           "supersolution_bound": {"passed": bool(over <= tol), "residual": over}}
    if points is not None and result.values is not None:
        gap = float(np.max(result.values - ev.upper_bound(points)))
        out["upper_bound"] = {"passed": bool(gap <= tol), "residual": gap}
    return out
