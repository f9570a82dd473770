"""Damped Newton and monotone iteration for -Lap u = W e^{-u}.

Dirichlet data are eliminated; Neumann data are outward normal derivatives
(constant per tag).  The nonlinear term is vertex-lumped, so the Jacobian
K + diag(m W e^{-u}) is an M-matrix on Delaunay meshes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .discretization import Field, Operator, as_nodal, assemble_operator, neumann_vector
from .errors import DivergedError, InternalError, PreconditionError
from .geometry import DIRICHLET, Mesh

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolveOptions:
    residual_tol: float = 1e-10
    max_newton: int = 50
    armijo_c: float = 1e-4
    linear_solver: str = "direct"  # or "cg"
    cg_tol: float = 1e-12
    max_monotone: int = 5000

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_newton < 1:
            raise ValueError("max_newton must be >= 1")
        if self.linear_solver not in ("direct", "cg"):
            raise ValueError("linear_solver must be 'direct' or 'cg'")


@dataclass
class SolveReport:
    iterations: int = 0
    residual: float = np.inf
    energy: list = field(default_factory=list)
    converged: bool = False

    def to_dict(self) -> dict:
        return {"iterations": int(self.iterations), "residual": float(self.residual),
                "energy": [float(e) for e in self.energy], "converged": bool(self.converged)}


def dirichlet_values(mesh: Mesh, dirichlet) -> np.ndarray:
    """Nodal Dirichlet data; ``dirichlet`` maps tag -> scalar or f(x, y).

    A node shared by several Dirichlet tags takes the value of the lowest tag.
    """
    g = np.zeros(mesh.n_nodes)
    if dirichlet is None:
        return g
    if not isinstance(dirichlet, dict):
        dirichlet = {t: dirichlet for t, k in mesh.tag_kinds.items() if k == DIRICHLET}
    for tag in sorted(dirichlet, reverse=True):
        nodes = mesh.tag_nodes(tag)
        val = dirichlet[tag]
        if callable(val):
            x = mesh.nodes[nodes]
            g[nodes] = np.asarray(val(x[:, 0], x[:, 1]), dtype=float)
        else:
            g[nodes] = float(val)
    return g


class _Problem:
    """Reduced (free-node) problem data shared by both solvers."""

    def __init__(self, op, weight, dirichlet, neumann):
        mesh = op.mesh
        self.op = op
        self.w = as_nodal(mesh, weight)
        if np.any(self.w < 0) or not np.all(np.isfinite(self.w)):
            raise PreconditionError("weight must be finite and nonnegative")
        if not (~op.free_mask).any():
            raise PreconditionError("a Dirichlet boundary part is required")
        self.g = dirichlet_values(mesh, dirichlet)
        self.b = neumann_vector(op, neumann)
        self.f = op.free
        self.d = op.fixed
        self.mw = (op.mass * self.w)[self.f]
        # linear part of the reduced gradient: K_FD g_D - b_F
        self.lin = op.k_fd @ self.g[self.d] - self.b[self.f]
        s = max(np.abs(self.mw).max(initial=0.0), np.abs(self.lin).max(initial=0.0))
        self.scale = s if s > 0 else 1.0

    def full(self, uf):
        u = self.g.copy()
        u[self.f] = uf
        return u

    def expterm(self, uf):
        with np.errstate(over="ignore"):
            return self.mw * np.exp(-uf)

    def grad(self, uf):
        return self.op.k_ff @ uf + self.lin - self.expterm(uf)

    def energy(self, uf):
        e = self.expterm(uf)
        return float(0.5 * uf @ (self.op.k_ff @ uf) + self.lin @ uf + e.sum())


def _factor(A):
    # symmetric mode without pivoting: A is an SPD M-matrix
    return spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                     options=dict(SymmetricMode=True))


def _linear_solve(A, rhs, opts):
    if opts.linear_solver == "direct":
        return _factor(A).solve(rhs)
    try:
        import pyamg

        M = pyamg.smoothed_aggregation_solver(A.tocsr()).aspreconditioner()
    except ImportError:  # pragma: no cover
        M = sp.diags(1.0 / A.diagonal())
    x, info = spla.cg(A, rhs, rtol=opts.cg_tol, atol=0.0, M=M, maxiter=2000)
    if info != 0:
        raise InternalError(f"CG did not converge (info={info})")
    return x


def solve_semilinear(mesh: Mesh, weight=1.0, dirichlet=None, neumann=None,
                     opts: Optional[SolveOptions] = None, initial=None,
                     operator: Optional[Operator] = None):
    """Minimise the discrete energy; returns (Field, SolveReport).

    ``dirichlet`` maps tag -> scalar or f(x, y) (default 0), ``neumann``
    maps tag -> constant outward derivative.  Raises DivergedError if the
    relative residual does not reach ``opts.residual_tol``.
    """
    opts = opts or SolveOptions()
    op = operator if operator is not None else assemble_operator(mesh)
    pb = _Problem(op, weight, dirichlet, neumann)
    uf = np.zeros(len(pb.f)) if initial is None else as_nodal(mesh, initial)[pb.f].copy()
    rep = SolveReport()
    J = pb.energy(uf)
    rep.energy.append(J)
    if len(uf) == 0:
        rep.residual, rep.converged = 0.0, True
        return Field(mesh, pb.full(uf)), rep
    for it in range(1, opts.max_newton + 1):
        r = pb.grad(uf)
        res = float(np.abs(r).max() / pb.scale)
        rep.residual = res
        if res <= opts.residual_tol:
            rep.converged = True
            break
        H = op.k_ff + sp.diags(pb.expterm(uf))
        delta = -_linear_solve(H, r, opts)
        slope = float(r @ delta)
        if not slope < 0:
            raise InternalError("Newton direction is not a descent direction")
        t = 1.0
        if -slope <= 1e-11 * (abs(J) + 1.0):
            # the energy decrease is below round-off in J, so Armijo tests
            # would only see noise; the quadratic model justifies a full step
            trial = uf + delta
            Jt = pb.energy(trial)
        else:
            for _ in range(60):
                trial = uf + t * delta
                Jt = pb.energy(trial)
                if np.isfinite(Jt) and Jt <= J + opts.armijo_c * t * slope:
                    break
                t *= 0.5
            else:
                rep.iterations = it
                raise DivergedError("line search failed", last=Field(mesh, pb.full(uf)),
                                    report=rep)
        uf = trial
        rep.iterations = it
        if Jt < J:
            rep.energy.append(Jt)
            J = Jt
        log.debug("newton %d res=%.3e t=%.3g J=%.15g", it, res, t, Jt)
    else:
        r = pb.grad(uf)
        rep.residual = float(np.abs(r).max() / pb.scale)
        rep.converged = rep.residual <= opts.residual_tol
    if not rep.converged:
        raise DivergedError(f"no convergence in {opts.max_newton} Newton steps "
                            f"(residual {rep.residual:.3e})",
                            last=Field(mesh, pb.full(uf)), report=rep)
    return Field(mesh, pb.full(uf), "u"), rep


def discrete_residual(op: Operator, u, weight, dirichlet=None, neumann=None) -> np.ndarray:
    """Free-node residual K u - m W e^{-u} - b (nodal array, zero on fixed nodes)."""
    u = as_nodal(op.mesh, u)
    w = as_nodal(op.mesh, weight)
    b = neumann_vector(op, neumann)
    with np.errstate(over="ignore"):
        r = op.stiffness @ u - op.mass * w * np.exp(-u) - b
    r[~op.free_mask] = 0.0
    return r


def monotone_iterate(mesh: Mesh, weight=1.0, start=None, opts: Optional[SolveOptions] = None,
                     dirichlet=None, neumann=None, operator: Optional[Operator] = None,
                     history: Optional[list] = None) -> Field:
    """Monotone iteration from a discrete subsolution.

    Solves (K + sigma M) u_{n+1} = M (W e^{-u_n} + sigma u_n) + b with
    sigma = max W e^{-u_0}; since u_n >= u_0 this dominates the Lipschitz
    constant of W e^{-u} along the whole sequence, so iterates increase.
    """
    opts = opts or SolveOptions()
    op = operator if operator is not None else assemble_operator(mesh)
    pb = _Problem(op, weight, dirichlet, neumann)
    u0 = np.zeros(mesh.n_nodes) if start is None else as_nodal(mesh, start).copy()
    if np.any(u0[pb.d] > pb.g[pb.d] + 1e-12):
        raise PreconditionError("start exceeds the Dirichlet data")
    u0[pb.d] = pb.g[pb.d]
    uf = u0[pb.f].copy()
    r = pb.grad(uf)
    if np.any(r > 1e-10 * pb.scale):
        raise PreconditionError("start is not a discrete subsolution")
    sigma = float(np.max(pb.w * np.exp(-u0), initial=0.0))
    m = op.mass[pb.f]
    lu = _factor(op.k_ff + sp.diags(sigma * m))
    if history is not None:
        history.append(pb.full(uf))
    for _ in range(opts.max_monotone):
        rhs = pb.expterm(uf) + sigma * m * uf - pb.lin
        new = lu.solve(rhs)
        step = float(np.abs(new - uf).max())
        uf = new
        if history is not None:
            history.append(pb.full(uf))
        if step <= 0.1 * opts.residual_tol * max(1.0, float(np.abs(uf).max())):
            break
    else:
        raise DivergedError("monotone iteration did not settle",
                            last=Field(mesh, pb.full(uf)))
    return Field(mesh, pb.full(uf), "u")
