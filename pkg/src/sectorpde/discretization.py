"""P1 finite elements: operators, nodal fields and the convex energy."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from . import _kernels
from .errors import AssemblyError, DomainError, EvaluationError
from .geometry import DIRICHLET, NEUMANN, Mesh


@dataclass(frozen=True, eq=False)
class Operator:
    """Assembled P1 data on one mesh.

    ``stiffness`` acts on all nodes; ``mass`` is the lumped (vertex) mass;
    ``neumann_loads[tag][i]`` is the integral of basis function i over the
    edges carrying ``tag``.
    """

    mesh: Mesh
    stiffness: sp.csr_matrix
    mass: np.ndarray
    free_mask: np.ndarray
    neumann_loads: dict

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(self.free_mask)

    @property
    def fixed(self) -> np.ndarray:
        return np.flatnonzero(~self.free_mask)

    @cached_property
    def k_ff(self) -> sp.csc_matrix:
        f = self.free
        return self.stiffness[f][:, f].tocsc()

    @cached_property
    def k_fd(self) -> sp.csr_matrix:
        return self.stiffness[self.free][:, self.fixed].tocsr()


@dataclass(eq=False)
class Field:
    """Nodal P1 field with barycentric point evaluation."""

    mesh: Mesh
    values: np.ndarray
    name: str = "u"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.n_nodes,):
            raise ValueError("field length does not match node count")

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def evaluate(self, points, snap: float = 0.0) -> np.ndarray:
        """Interpolate at ``points``.

        Points outside the mesh raise DomainError unless they lie within
        ``snap`` of the boundary, in which case they are projected onto it.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tri, bary = self.mesh.locate(pts)
        out = np.empty(len(pts))
        ok = tri >= 0
        v = self.values[self.mesh.triangles[tri[ok]]]
        out[ok] = (v * bary[ok]).sum(axis=1)
        miss = np.flatnonzero(~ok)
        if len(miss):
            tol = max(snap, 1e-10 * _scale(self.mesh))
            vals, dist = _boundary_project(self.mesh, self.values, pts[miss])
            if np.any(dist > tol):
                k = miss[np.argmax(dist)]
                raise DomainError(f"point {pts[k].tolist()} lies outside the mesh")
            out[miss] = vals
        return out

    def gradient(self) -> np.ndarray:
        """Piecewise-constant gradient, one row per triangle."""
        return _kernels.gradients(self.mesh.nodes, self.mesh.triangles, self.values)

    def with_values(self, values, name=None) -> "Field":
        return Field(self.mesh, values, self.name if name is None else name)


def _scale(mesh):
    ext = mesh.nodes.max(axis=0) - mesh.nodes.min(axis=0)
    return float(max(ext.max(), 1.0))


def _boundary_project(mesh, values, pts):
    be = mesh.boundary_edges
    a = mesh.nodes[be[:, 0]]
    b = mesh.nodes[be[:, 1]]
    tree = cKDTree(0.5 * (a + b))
    k = min(16, len(be))
    _, idx = tree.query(pts, k=k)
    idx = np.atleast_2d(idx).reshape(len(pts), k)
    ab = b[idx] - a[idx]
    t = np.clip(((pts[:, None, :] - a[idx]) * ab).sum(-1) / (ab ** 2).sum(-1), 0.0, 1.0)
    proj = a[idx] + t[..., None] * ab
    d = np.hypot(*(pts[:, None, :] - proj).transpose(2, 0, 1))
    j = np.argmin(d, axis=1)
    rows = np.arange(len(pts))
    e = idx[rows, j]
    tt = t[rows, j]
    vals = (1 - tt) * values[be[e, 0]] + tt * values[be[e, 1]]
    return vals, d[rows, j]


def assemble_operator(mesh: Mesh) -> Operator:
    """Exact P1 stiffness, lumped mass, Dirichlet mask and Neumann loads."""
    area, kloc = _kernels.local_stiffness(mesh.nodes, mesh.triangles)
    bad = np.flatnonzero(~(area > 0))
    if len(bad):
        raise AssemblyError(f"degenerate triangle {int(bad[0])}", triangle=int(bad[0]))
    t = mesh.triangles
    n = mesh.n_nodes
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    K = sp.coo_matrix((kloc.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    K.sum_duplicates()
    mass = _kernels.lumped_mass(mesh.nodes, mesh.triangles, n)

    free = np.ones(n, dtype=bool)
    loads = {}
    be = mesh.boundary_edges
    elen = np.hypot(*(mesh.nodes[be[:, 1]] - mesh.nodes[be[:, 0]]).T)
    for tag, kind in mesh.tag_kinds.items():
        sel = mesh.edge_tags == tag
        if kind == DIRICHLET:
            free[be[sel].ravel()] = False
        elif kind == NEUMANN:
            b = np.zeros(n)
            np.add.at(b, be[sel, 0], 0.5 * elen[sel])
            np.add.at(b, be[sel, 1], 0.5 * elen[sel])
            loads[tag] = b
    return Operator(mesh=mesh, stiffness=K, mass=mass, free_mask=free, neumann_loads=loads)


def interpolate_field(mesh: Mesh, f: Callable, name: str = "f") -> Field:
    """Nodal interpolant of ``f(x, y)`` (vectorised over node arrays)."""
    vals = np.asarray(f(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)
    vals = np.broadcast_to(vals, (mesh.n_nodes,)).copy()
    bad = np.flatnonzero(~np.isfinite(vals))
    if len(bad):
        raise EvaluationError(f"non-finite value at node {int(bad[0])}", node=int(bad[0]))
    return Field(mesh, vals, name)


def as_nodal(mesh: Mesh, w) -> np.ndarray:
    """Scalar, array, Field or callable -> nodal array."""
    if isinstance(w, Field):
        return w.values
    if callable(w):
        return interpolate_field(mesh, w).values
    return np.broadcast_to(np.asarray(w, dtype=float), (mesh.n_nodes,)).copy()


def neumann_vector(op: Operator, neumann: Optional[dict]) -> np.ndarray:
    b = np.zeros(op.mesh.n_nodes)
    for tag, g in (neumann or {}).items():
        if tag not in op.neumann_loads:
            raise KeyError(f"tag {tag} is not a Neumann segment")
        b += float(g) * op.neumann_loads[tag]
    return b


def energy_functional(op: Operator, u, weight, neumann: Optional[dict] = None) -> float:
    """J(u) = 1/2 int |grad u|^2 + int W e^{-u} - sum_tag g_tag int_tag u.

    ``neumann[tag]`` is the outward normal derivative prescribed on ``tag``.
    The exponential term uses vertex quadrature.
    """
    u = as_nodal(op.mesh, u)
    w = as_nodal(op.mesh, weight)
    b = neumann_vector(op, neumann)
    with np.errstate(over="ignore"):
        nl = np.sum(op.mass * w * np.exp(-u))
    return float(0.5 * u @ (op.stiffness @ u) + nl - b @ u)
