"""Element-level numeric kernels.

Every kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
version.  The active backend is chosen once at import time from the
``SECTORPDE_KERNELS`` environment variable (``numba`` or ``numpy``); the
default is numba when it imports cleanly.  Both implementations stay
reachable as ``numba_impl`` / ``numpy_impl`` so they can be compared.
"""

import os
from types import SimpleNamespace

import numpy as np
from scipy.spatial import cKDTree

BARY_TOL = 1e-10

try:  # pragma: no cover - exercised implicitly
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


# ---------------------------------------------------------------------------
# numpy implementations


def _np_local_stiffness(nodes, tris):
    p0 = nodes[tris[:, 0]]
    p1 = nodes[tris[:, 1]]
    p2 = nodes[tris[:, 2]]
    # rows of E are the edges opposite each vertex
    e0 = p2 - p1
    e1 = p0 - p2
    e2 = p1 - p0
    area = 0.5 * (e2[:, 0] * (-e1[:, 1]) - e2[:, 1] * (-e1[:, 0]))
    E = np.stack([e0, e1, e2], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        K = np.einsum("tik,tjk->tij", E, E) / (4.0 * area)[:, None, None]
    return area, K


def _np_lumped_mass(nodes, tris, n_nodes):
    p0 = nodes[tris[:, 0]]
    p1 = nodes[tris[:, 1]]
    p2 = nodes[tris[:, 2]]
    area = 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
    m = np.zeros(n_nodes)
    np.add.at(m, tris.ravel(), np.repeat(area / 3.0, 3))
    return m


def _np_gradients(nodes, tris, values):
    p0 = nodes[tris[:, 0]]
    p1 = nodes[tris[:, 1]]
    p2 = nodes[tris[:, 2]]
    d1 = p1 - p0
    d2 = p2 - p0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    u = values[tris]
    du1 = u[:, 1] - u[:, 0]
    du2 = u[:, 2] - u[:, 0]
    gx = (du1 * d2[:, 1] - du2 * d1[:, 1]) / det
    gy = (du2 * d1[:, 0] - du1 * d2[:, 0]) / det
    return np.column_stack([gx, gy])


def _np_barycentric(nodes, tris, cand, points):
    """Barycentric coordinates of points[i] in triangles cand[i, :]."""
    p0 = nodes[tris[cand, 0]]
    p1 = nodes[tris[cand, 1]]
    p2 = nodes[tris[cand, 2]]
    q = points[:, None, :]
    det = ((p1[..., 0] - p0[..., 0]) * (p2[..., 1] - p0[..., 1])
           - (p1[..., 1] - p0[..., 1]) * (p2[..., 0] - p0[..., 0]))
    l1 = ((q[..., 0] - p0[..., 0]) * (p2[..., 1] - p0[..., 1])
          - (q[..., 1] - p0[..., 1]) * (p2[..., 0] - p0[..., 0])) / det
    l2 = ((p1[..., 0] - p0[..., 0]) * (q[..., 1] - p0[..., 1])
          - (p1[..., 1] - p0[..., 1]) * (q[..., 0] - p0[..., 0])) / det
    l0 = 1.0 - l1 - l2
    return np.stack([l0, l1, l2], axis=-1)


def _np_locate(nodes, tris, points, locator):
    tree = locator.tree
    n_pts = len(points)
    found = np.full(n_pts, -1, dtype=np.int64)
    bary = np.zeros((n_pts, 3))
    todo = np.arange(n_pts)
    k = min(12, len(tris))
    while len(todo):
        _, cand = tree.query(points[todo], k=k)
        cand = np.asarray(cand).reshape(len(todo), -1)
        lam = _np_barycentric(nodes, tris, cand, points[todo])
        score = lam.min(axis=-1)
        best = np.argmax(score, axis=1)
        rows = np.arange(len(todo))
        ok = score[rows, best] >= -BARY_TOL
        found[todo[ok]] = cand[rows[ok], best[ok]]
        bary[todo[ok]] = lam[rows[ok], best[ok]]
        todo = todo[~ok]
        if k >= len(tris):
            break
        k = min(len(tris), 8 * k)
    return found, bary


# ---------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_local_stiffness(nodes, tris):
        nt = tris.shape[0]
        area = np.empty(nt)
        K = np.empty((nt, 3, 3))
        E = np.empty((3, 2))
        for t in range(nt):
            a = tris[t, 0]
            b = tris[t, 1]
            c = tris[t, 2]
            E[0, 0] = nodes[c, 0] - nodes[b, 0]
            E[0, 1] = nodes[c, 1] - nodes[b, 1]
            E[1, 0] = nodes[a, 0] - nodes[c, 0]
            E[1, 1] = nodes[a, 1] - nodes[c, 1]
            E[2, 0] = nodes[b, 0] - nodes[a, 0]
            E[2, 1] = nodes[b, 1] - nodes[a, 1]
            A = 0.5 * (E[2, 0] * (-E[1, 1]) - E[2, 1] * (-E[1, 0]))
            area[t] = A
            for i in range(3):
                for j in range(3):
                    K[t, i, j] = (E[i, 0] * E[j, 0] + E[i, 1] * E[j, 1]) / (4.0 * A)
        return area, K

    @njit(cache=True)
    def _nb_lumped_mass(nodes, tris, n_nodes):
        m = np.zeros(n_nodes)
        for t in range(tris.shape[0]):
            a = tris[t, 0]
            b = tris[t, 1]
            c = tris[t, 2]
            A = 0.5 * ((nodes[b, 0] - nodes[a, 0]) * (nodes[c, 1] - nodes[a, 1])
                       - (nodes[b, 1] - nodes[a, 1]) * (nodes[c, 0] - nodes[a, 0]))
            m[a] += A / 3.0
            m[b] += A / 3.0
            m[c] += A / 3.0
        return m

    @njit(cache=True)
    def _nb_gradients(nodes, tris, values):
        nt = tris.shape[0]
        g = np.empty((nt, 2))
        for t in range(nt):
            a = tris[t, 0]
            b = tris[t, 1]
            c = tris[t, 2]
            d1x = nodes[b, 0] - nodes[a, 0]
            d1y = nodes[b, 1] - nodes[a, 1]
            d2x = nodes[c, 0] - nodes[a, 0]
            d2y = nodes[c, 1] - nodes[a, 1]
            det = d1x * d2y - d1y * d2x
            du1 = values[b] - values[a]
            du2 = values[c] - values[a]
            g[t, 0] = (du1 * d2y - du2 * d1y) / det
            g[t, 1] = (du2 * d1x - du1 * d2x) / det
        return g

    @njit(cache=True)
    def _nb_locate_kernel(nodes, tris, points, origin, cell, nx, ny,
                          start, members, tol):
        n_pts = points.shape[0]
        found = np.full(n_pts, -1, dtype=np.int64)
        bary = np.zeros((n_pts, 3))
        for p in range(n_pts):
            qx = points[p, 0]
            qy = points[p, 1]
            ix = int(np.floor((qx - origin[0]) / cell))
            iy = int(np.floor((qy - origin[1]) / cell))
            if ix < 0 or iy < 0 or ix >= nx or iy >= ny:
                continue
            b = iy * nx + ix
            best = -np.inf
            for s in range(start[b], start[b + 1]):
                t = members[s]
                a0 = tris[t, 0]
                a1 = tris[t, 1]
                a2 = tris[t, 2]
                x0 = nodes[a0, 0]
                y0 = nodes[a0, 1]
                x1 = nodes[a1, 0] - x0
                y1 = nodes[a1, 1] - y0
                x2 = nodes[a2, 0] - x0
                y2 = nodes[a2, 1] - y0
                det = x1 * y2 - y1 * x2
                l1 = ((qx - x0) * y2 - (qy - y0) * x2) / det
                l2 = (x1 * (qy - y0) - y1 * (qx - x0)) / det
                l0 = 1.0 - l1 - l2
                sc = min(l0, min(l1, l2))
                if sc > best:
                    best = sc
                    found[p] = t
                    bary[p, 0] = l0
                    bary[p, 1] = l1
                    bary[p, 2] = l2
            if best < -tol:
                found[p] = -1
                bary[p, 0] = 0.0
                bary[p, 1] = 0.0
                bary[p, 2] = 0.0
        return found, bary

    def _nb_locate(nodes, tris, points, locator):
        g = locator.grid
        return _nb_locate_kernel(nodes, tris, points, g.origin, g.cell, g.nx,
                                 g.ny, g.start, g.members, BARY_TOL)


# ---------------------------------------------------------------------------
# locator construction (shared)


def _bucket_grid(nodes, tris):
    """CSR map from uniform grid cells to overlapping triangles."""
    p = nodes[tris]
    lo = p.min(axis=1)
    hi = p.max(axis=1)
    origin = nodes.min(axis=0) - 1e-9
    extent = nodes.max(axis=0) + 1e-9 - origin
    cell = max(np.sqrt(extent[0] * extent[1] / max(len(tris), 1)) * 1.5, 1e-300)
    nx = int(np.ceil(extent[0] / cell)) + 1
    ny = int(np.ceil(extent[1] / cell)) + 1
    i0 = np.floor((lo - origin) / cell).astype(np.int64)
    i1 = np.floor((hi - origin) / cell).astype(np.int64)
    cx = i1[:, 0] - i0[:, 0] + 1
    cy = i1[:, 1] - i0[:, 1] + 1
    counts = cx * cy
    tri_ids = np.repeat(np.arange(len(tris), dtype=np.int64), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    rep_cx = np.repeat(cx, counts)
    bx = np.repeat(i0[:, 0], counts) + offs % rep_cx
    by = np.repeat(i0[:, 1], counts) + offs // rep_cx
    bucket = by * nx + bx
    order = np.argsort(bucket, kind="stable")
    members = tri_ids[order]
    start = np.zeros(nx * ny + 1, dtype=np.int64)
    np.add.at(start, bucket + 1, 1)
    start = np.cumsum(start)
    return SimpleNamespace(origin=origin, cell=float(cell), nx=nx, ny=ny,
                           start=start, members=members)


class Locator:
    """Point-location acceleration structure for one triangulation."""

    def __init__(self, nodes, tris):
        self.nodes = np.ascontiguousarray(nodes, dtype=np.float64)
        self.tris = np.ascontiguousarray(tris, dtype=np.int64)
        self._grid = None
        self._tree = None

    @property
    def grid(self):
        if self._grid is None:
            self._grid = _bucket_grid(self.nodes, self.tris)
        return self._grid

    @property
    def tree(self):
        if self._tree is None:
            self._tree = cKDTree(self.nodes[self.tris].mean(axis=1))
        return self._tree


# ---------------------------------------------------------------------------
# dispatch

numpy_impl = SimpleNamespace(
    name="numpy",
    local_stiffness=_np_local_stiffness,
    lumped_mass=_np_lumped_mass,
    gradients=_np_gradients,
    locate=_np_locate,
)

if HAVE_NUMBA:
    numba_impl = SimpleNamespace(
        name="numba",
        local_stiffness=_nb_local_stiffness,
        lumped_mass=_nb_lumped_mass,
        gradients=_nb_gradients,
        locate=_nb_locate,
    )
else:  # pragma: no cover
    numba_impl = None


def _select():
    choice = os.environ.get("SECTORPDE_KERNELS", "").strip().lower()
    if choice == "numpy" or not HAVE_NUMBA:
        return numpy_impl
    if choice not in ("", "numba"):
        raise ValueError(f"unknown SECTORPDE_KERNELS value {choice!r}")
    return numba_impl


active = _select()


def local_stiffness(nodes, tris):
    return active.local_stiffness(np.ascontiguousarray(nodes, dtype=np.float64),
                                  np.ascontiguousarray(tris, dtype=np.int64))


def lumped_mass(nodes, tris, n_nodes):
    return active.lumped_mass(np.ascontiguousarray(nodes, dtype=np.float64),
                              np.ascontiguousarray(tris, dtype=np.int64), int(n_nodes))


def gradients(nodes, tris, values):
    return active.gradients(np.ascontiguousarray(nodes, dtype=np.float64),
                            np.ascontiguousarray(tris, dtype=np.int64),
                            np.ascontiguousarray(values, dtype=np.float64))


def locate(locator, points):
    pts = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    return active.locate(locator.nodes, locator.tris, pts, locator)
