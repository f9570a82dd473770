"""Domain descriptions and conforming triangular meshes.

Sectors and plain disks use structured ring meshes (concentric rings of
nodes stitched by a zipper sweep, then Delaunay edge flips).  Sectors are
built on the upper half and mirrored, so the triangulation is exactly
symmetric under theta -> -theta.  General polygons and the split disk are
meshed by a constrained Delaunay generator driven by a size field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .errors import InvalidSpecError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

# default radius of the uniformly resolved core of a sector mesh
DEFAULT_CORE_RADIUS = 5.0


# ---------------------------------------------------------------------------
# domain specs


@dataclass(frozen=True)
class SectorSpec:
    """Truncated sector {r < radius, |theta| < theta0}.

    Inside ``core_radius`` the ring radii follow the power law
    ``r_k = core (k/N)**beta``; beyond it the rings are geometric with a
    fixed number of angular cells, so element size grows linearly in r.
    """

    theta0: float
    radius: float
    mesh_size: float
    grading_exponent: Optional[float] = None
    core_radius: Optional[float] = None

    def alpha(self) -> float:
        return math.pi / (2.0 * self.theta0)

    @property
    def beta(self) -> float:
        if self.grading_exponent is not None:
            return float(self.grading_exponent)
        a = self.alpha()
        return 2.0 / a if a < 1.0 else 1.0

    @property
    def core(self) -> float:
        c = DEFAULT_CORE_RADIUS if self.core_radius is None else self.core_radius
        return min(self.radius, c)

    def validate(self):
        if not (0.0 < self.theta0 <= math.pi + 1e-15):
            raise InvalidSpecError(f"theta0={self.theta0} outside (0, pi]")
        if not self.radius > 0:
            raise InvalidSpecError("radius must be positive")
        if not self.mesh_size > 0 or self.mesh_size >= self.radius:
            raise InvalidSpecError("mesh_size must satisfy 0 < h < R")
        if self.beta < 1.0:
            raise InvalidSpecError("grading exponent must be >= 1")
        if self.core_radius is not None and self.core_radius <= self.mesh_size:
            raise InvalidSpecError("core_radius must exceed mesh_size")

    @property
    def is_slit(self) -> bool:
        return abs(self.theta0 - math.pi) < 1e-14


@dataclass(frozen=True)
class CornerGeometry:
    """Local sector data at a polygon vertex."""

    vertex: np.ndarray
    theta0: float
    axis: float  # polar angle of the bisector

    @property
    def alpha(self) -> float:
        return math.pi / (2.0 * self.theta0)


@dataclass(frozen=True)
class PolygonSpec:
    vertices: tuple
    reentrant_index: Optional[int] = None
    mesh_size: float = 0.05
    grading_exponent: Optional[float] = None
    layer_width: Optional[float] = None
    layer_growth: float = 0.25
    corner_scale: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "vertices",
                           tuple(tuple(float(c) for c in v) for v in self.vertices))

    @property
    def points(self) -> np.ndarray:
        return np.array(self.vertices, dtype=float)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def signed_area(self) -> float:
        p = self.points
        q = np.roll(p, -1, axis=0)
        return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))

    def perimeter(self) -> float:
        p = self.points
        return float(np.sum(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)))

    def diameter(self) -> float:
        p = self.points
        d = p[:, None, :] - p[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    def interior_angles(self) -> np.ndarray:
        p = self.points
        prev = np.roll(p, 1, axis=0) - p
        nxt = np.roll(p, -1, axis=0) - p
        a_next = np.arctan2(nxt[:, 1], nxt[:, 0])
        a_prev = np.arctan2(prev[:, 1], prev[:, 0])
        # interior lies counterclockwise from the outgoing side to the incoming one
        return np.mod(a_prev - a_next, 2 * np.pi)

    @property
    def beta(self) -> float:
        if self.grading_exponent is not None:
            return float(self.grading_exponent)
        if self.reentrant_index is None:
            return 1.0
        return 2.0 / self.corner().alpha

    def corner(self, index: Optional[int] = None) -> CornerGeometry:
        i = self.reentrant_index if index is None else index
        if i is None:
            raise InvalidSpecError("polygon has no reentrant corner")
        p = self.points
        c = p[i]
        nxt = p[(i + 1) % self.n] - c
        theta0 = 0.5 * float(self.interior_angles()[i])
        axis = math.atan2(nxt[1], nxt[0]) + theta0
        return CornerGeometry(vertex=c, theta0=theta0, axis=axis)

    def corner_inradius(self) -> float:
        """Largest r with the tangent sub-sector Omega_r inside the polygon."""
        i = self.reentrant_index
        p = self.points
        c = p[i]
        best = np.inf
        for j in range(self.n):
            if j in (i, (i - 1) % self.n):
                continue
            a, b = p[j], p[(j + 1) % self.n]
            best = min(best, _point_segment_distance(c[None, :], a, b)[0])
        return float(best)

    def corner_circumradius(self) -> float:
        c = self.points[self.reentrant_index]
        return float(np.linalg.norm(self.points - c, axis=1).max())

    def validate(self):
        p = self.points
        if self.n < 3:
            raise InvalidSpecError("polygon needs at least 3 vertices")
        if not self.mesh_size > 0:
            raise InvalidSpecError("mesh_size must be positive")
        if self.signed_area() <= 0:
            raise InvalidSpecError("polygon vertices must be counterclockwise")
        for i in range(self.n):
            for j in range(i + 1, self.n):
                if j == i + 1 or (i == 0 and j == self.n - 1):
                    continue
                if _segments_intersect(p[i], p[(i + 1) % self.n], p[j], p[(j + 1) % self.n]):
                    raise InvalidSpecError(f"polygon sides {i} and {j} intersect")
        if self.reentrant_index is not None:
            i = self.reentrant_index
            if not 0 <= i < self.n:
                raise InvalidSpecError("reentrant_index out of range")
            ang = self.interior_angles()[i]
            if not (math.pi < ang < 2 * math.pi):
                raise InvalidSpecError("vertex at reentrant_index is not reentrant")
            if not self.in_tangent_cone():
                raise InvalidSpecError("polygon is not contained in its tangent cone")

    def in_tangent_cone(self, samples: int = 64) -> bool:
        cg = self.corner()
        p = self.points
        t = np.linspace(0.0, 1.0, samples)
        for j in range(self.n):
            a, b = p[j], p[(j + 1) % self.n]
            pts = a[None, :] + t[:, None] * (b - a)[None, :]
            d = pts - cg.vertex
            r = np.hypot(d[:, 0], d[:, 1])
            th = np.angle((d[:, 0] + 1j * d[:, 1]) * np.exp(-1j * cg.axis))
            bad = (r > 1e-12) & (np.abs(th) > cg.theta0 + 1e-9)
            if bad.any():
                return False
        return True

    @classmethod
    def from_json(cls, source) -> "PolygonSpec":
        """Read ``{"vertices": [[x, y], ...], "reentrant_index": n, "h": .., "beta": ..}``."""
        if isinstance(source, (str, Path)) and Path(source).exists():
            doc = json.loads(Path(source).read_text())
        elif isinstance(source, str):
            doc = json.loads(source)
        else:
            doc = dict(source)
        try:
            verts = doc["vertices"]
        except KeyError as exc:
            raise InvalidSpecError("polygon document lacks 'vertices'") from exc
        return cls(vertices=verts,
                   reentrant_index=doc.get("reentrant_index"),
                   mesh_size=float(doc.get("h", 0.05)),
                   grading_exponent=doc.get("beta"))

    def to_json(self) -> dict:
        return {"vertices": [list(v) for v in self.vertices],
                "reentrant_index": self.reentrant_index,
                "h": self.mesh_size, "beta": self.grading_exponent}


def unit_square(h: float = 0.05, **kw) -> PolygonSpec:
    return PolygonSpec(vertices=((0, 0), (1, 0), (1, 1), (0, 1)), mesh_size=h, **kw)


def lshape(h: float = 0.05, **kw) -> PolygonSpec:
    """[-1,1]^2 minus the open quadrant (0,1]x[-1,0); reentrant corner at 0."""
    return PolygonSpec(vertices=((-1, -1), (0, -1), (0, 0), (1, 0), (1, 1), (-1, 1)),
                       reentrant_index=2, mesh_size=h, **kw)


@dataclass(frozen=True)
class DiskSpec:
    """Disk; with ``split`` the left half-circle is Dirichlet and the right Neumann.

    ``refine_points`` holds (point, scale) pairs: near each point the size
    drops linearly to ``mesh_size * min_size_ratio`` over distance ``scale``.
    """

    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    split: bool = False
    mesh_size: float = 0.05
    refine_points: tuple = ()
    min_size_ratio: float = 0.125

    def validate(self):
        if not self.radius > 0:
            raise InvalidSpecError("disk radius must be positive")
        if not self.mesh_size > 0:
            raise InvalidSpecError("mesh_size must be positive")


# ---------------------------------------------------------------------------
# mesh


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming P1 triangulation.

    ``edge_tags[e]`` is the segment id of ``boundary_edges[e]``;
    ``tag_kinds`` maps segment id to DIRICHLET or NEUMANN.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    tag_kinds: dict
    corner_node: Optional[int] = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, dt in (("nodes", np.float64), ("triangles", np.int64),
                         ("boundary_edges", np.int64), ("edge_tags", np.int64)):
            arr = np.ascontiguousarray(getattr(self, name), dtype=dt)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]], axis=1)
        return np.sqrt((e ** 2).sum(-1)).max(axis=1)

    @cached_property
    def locator(self):
        return _kernels.Locator(self.nodes, self.triangles)

    def tag_nodes(self, tag: int) -> np.ndarray:
        return np.unique(self.boundary_edges[self.edge_tags == tag])

    def kind_nodes(self, kind: str) -> np.ndarray:
        tags = [t for t, k in self.tag_kinds.items() if k == kind]
        mask = np.isin(self.edge_tags, tags)
        return np.unique(self.boundary_edges[mask])

    def boundary_length(self, tag: Optional[int] = None) -> float:
        e = self.boundary_edges if tag is None else self.boundary_edges[self.edge_tags == tag]
        d = self.nodes[e[:, 1]] - self.nodes[e[:, 0]]
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def locate(self, points):
        return _kernels.locate(self.locator, points)


def boundary_edges_of(triangles: np.ndarray) -> np.ndarray:
    """Edges used by exactly one triangle, oriented with the interior on the left."""
    t = np.asarray(triangles)
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(e, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    return e[counts[inv] == 1]


def validate_mesh(mesh: Mesh) -> list:
    """Return a list of invariant violations (empty when the mesh is valid)."""
    problems = []
    if np.any(mesh.areas <= 0):
        problems.append(f"{int(np.sum(mesh.areas <= 0))} triangles with non-positive area")
    t = mesh.triangles
    e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    keys, counts = np.unique(e, axis=0, return_counts=True)
    if np.any(counts > 2):
        problems.append("edge shared by more than two triangles")
    once = {tuple(k) for k in keys[counts == 1]}
    tagged = [tuple(sorted(map(int, be))) for be in mesh.boundary_edges]
    if len(set(tagged)) != len(tagged):
        problems.append("boundary edge tagged more than once")
    if set(tagged) != once:
        problems.append("tagged boundary edges differ from topological boundary")
    if len(mesh.edge_tags) != len(mesh.boundary_edges):
        problems.append("edge tag array length mismatch")
    unknown = set(np.unique(mesh.edge_tags).tolist()) - set(mesh.tag_kinds)
    if unknown:
        problems.append(f"edge tags without kind: {sorted(unknown)}")
    if mesh.info.get("slit"):
        _, first, cnt = np.unique(mesh.nodes, axis=0, return_index=True, return_counts=True)
        dup = np.unique(mesh.nodes, axis=0)[cnt > 1]
        off_slit = dup[(dup[:, 1] != 0) | (dup[:, 0] >= 0)]
        if len(off_slit):
            problems.append("duplicated nodes away from the slit")
        n_slit = int(np.sum((mesh.nodes[:, 1] == 0) & (mesh.nodes[:, 0] < 0)))
        if n_slit != 2 * len(dup):
            problems.append("slit nodes are not duplicated pairwise")
    return problems


# ---------------------------------------------------------------------------
# ring-mesh machinery


def _zipper(ids_a, ang_a, ids_b, ang_b, pts):
    """Triangulate the band between two angularly sorted rings."""
    tris = []
    i = j = 0
    na = len(ids_a) - 1
    nb = len(ids_b) - 1
    while i < na or j < nb:
        if i == na:
            adv_a = False
        elif j == nb:
            adv_a = True
        else:
            da = ang_a[i + 1]
            db = ang_b[j + 1]
            if abs(da - db) <= 1e-12 * max(1.0, abs(da)):
                # tie: choose the shorter new diagonal
                la = np.hypot(*(pts[ids_a[i + 1]] - pts[ids_b[j]]))
                lb = np.hypot(*(pts[ids_a[i]] - pts[ids_b[j + 1]]))
                adv_a = la <= lb
            else:
                adv_a = da < db
        if adv_a:
            tris.append((ids_a[i], ids_a[i + 1], ids_b[j]))
            i += 1
        else:
            tris.append((ids_a[i], ids_b[j + 1], ids_b[j]))
            j += 1
    return tris


def _orient(tris, pts):
    tris = np.asarray(tris, dtype=np.int64)
    p = pts[tris]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    neg = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tris[neg] = tris[neg][:, [0, 2, 1]]
    return tris


def _opposite_angle(p, a, b, c):
    """Angle at c in triangle (a, b, c), vectorised."""
    u = p[a] - p[c]
    v = p[b] - p[c]
    cross = u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]
    dot = (u * v).sum(-1)
    return np.abs(np.arctan2(cross, dot))


def _lawson_flip(tris, pts, max_sweeps=100):
    """Flip interior edges until every edge is locally Delaunay."""
    tris = _orient(tris, pts)
    nt = len(tris)
    for _ in range(max_sweeps):
        e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        opp = np.concatenate([tris[:, 2], tris[:, 0], tris[:, 1]])
        owner = np.tile(np.arange(nt), 3)
        key = np.sort(e, axis=1)
        order = np.lexsort((key[:, 1], key[:, 0]))
        ks = key[order]
        same = np.all(ks[1:] == ks[:-1], axis=1)
        i1 = order[:-1][same]
        i2 = order[1:][same]
        a, b = key[i1, 0], key[i1, 1]
        s = _opposite_angle(pts, a, b, opp[i1]) + _opposite_angle(pts, a, b, opp[i2])
        bad = np.flatnonzero(s > math.pi + 1e-9)
        if not len(bad):
            break
        bad = bad[np.argsort(-s[bad])]
        used = np.zeros(nt, dtype=bool)
        for k in bad:
            t1, t2 = owner[i1[k]], owner[i2[k]]
            if used[t1] or used[t2]:
                continue
            c, d = opp[i1[k]], opp[i2[k]]
            tris[t1] = (c, d, a[k])
            tris[t2] = (c, d, b[k])
            used[t1] = used[t2] = True
        tris = _orient(tris, pts)
    return tris


def _ring_counts(radii, spacing, theta_span, n_min):
    n = np.maximum(n_min, np.ceil(theta_span * radii / spacing - 1e-9)).astype(int)
    return np.maximum.accumulate(n)


def sector_ring_radii(spec: SectorSpec):
    """Ring radii (including r=0) and the number of power-law core layers."""
    rho = spec.core
    beta = spec.beta
    n_core = max(2, int(math.ceil(beta * rho / spec.mesh_size - 1e-9)))
    core = rho * (np.arange(n_core + 1) / n_core) ** beta
    radii = [core]
    if spec.radius > rho * (1 + 1e-12):
        q = 1.0 + spec.mesh_size / rho
        n_out = max(1, int(math.ceil(math.log(spec.radius / rho) / math.log(q) - 1e-9)))
        outer = rho * (spec.radius / rho) ** (np.arange(1, n_out + 1) / n_out)
        outer[-1] = spec.radius
        radii.append(outer)
    return np.concatenate(radii), n_core


def mesh_sector(spec: SectorSpec) -> Mesh:
    """Mirror-symmetric graded mesh of the truncated sector."""
    spec.validate()
    th0 = math.pi if spec.is_slit else spec.theta0
    radii, n_core = sector_ring_radii(spec)
    nr = len(radii) - 1
    spacing = np.empty(nr + 1)
    spacing[1:-1] = 0.5 * (radii[2:] - radii[:-2])
    spacing[-1] = radii[-1] - radii[-2]
    spacing[0] = spacing[1]
    n_min = max(2, int(math.ceil(th0 / (math.pi / 4) - 1e-9)))
    counts = _ring_counts(radii[1:], spacing[1:], th0, n_min)

    # upper-half nodes: corner, then each ring from theta=0 to theta0
    pts = [np.zeros((1, 2))]
    ring_ids = [np.array([0])]
    ring_ang = [np.array([0.0])]
    nxt = 1
    for r, n in zip(radii[1:], counts):
        ang = th0 * np.arange(n + 1) / n
        xy = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        if spec.is_slit:
            xy[-1] = (-r, 0.0)
        xy[0, 1] = 0.0
        pts.append(xy)
        ring_ids.append(np.arange(nxt, nxt + n + 1))
        ring_ang.append(ang)
        nxt += n + 1
    half = np.concatenate(pts)
    tris = []
    for k in range(nr):
        if k == 0:
            # fan around the corner
            tris += [(0, ring_ids[1][j + 1], ring_ids[1][j]) for j in range(len(ring_ids[1]) - 1)]
            continue
        tris += _zipper(ring_ids[k], ring_ang[k], ring_ids[k + 1], ring_ang[k + 1], half)
    tris = _lawson_flip(tris, half)

    # mirror
    on_axis = np.zeros(len(half), dtype=bool)
    on_axis[0] = True
    for ids in ring_ids[1:]:
        on_axis[ids[0]] = True
    mirror_of = np.arange(len(half))
    off = np.flatnonzero(~on_axis)
    mirror_of[off] = len(half) + np.arange(len(off))
    low = half[off].copy()
    low[:, 1] = -low[:, 1]
    nodes = np.concatenate([half, low])
    mirror = np.concatenate([mirror_of, off])
    low_tris = mirror_of[tris][:, [0, 2, 1]]
    all_tris = np.concatenate([tris, low_tris])

    top = np.array([0] + [ids[-1] for ids in ring_ids[1:]])
    upper_set = set(top.tolist())
    lower_set = set(mirror_of[top].tolist())
    arc_set = set(ring_ids[-1].tolist()) | set(mirror_of[ring_ids[-1]].tolist())
    bedges = boundary_edges_of(all_tris)
    tags = np.empty(len(bedges), dtype=np.int64)
    for e, (a, b) in enumerate(bedges):
        if a in upper_set and b in upper_set:
            tags[e] = 2
        elif a in lower_set and b in lower_set:
            tags[e] = 1
        elif a in arc_set and b in arc_set:
            tags[e] = 3
        else:  # pragma: no cover - construction guarantees a tag
            raise InvalidSpecError("untagged boundary edge in sector mesh")

    full_rings = []
    for ids in ring_ids[1:]:
        lower = mirror_of[ids[1:]][::-1]
        full_rings.append(np.concatenate([lower, ids]))
    info = dict(kind="sector", theta0=spec.theta0, radius=spec.radius,
                ring_radii=radii, n_core_layers=n_core, rings=full_rings,
                mirror=mirror, slit=spec.is_slit, spec=spec)
    return Mesh(nodes=nodes, triangles=all_tris, boundary_edges=bedges,
                edge_tags=tags, tag_kinds={1: DIRICHLET, 2: DIRICHLET, 3: DIRICHLET},
                corner_node=0, info=info)


def mesh_disk(spec: DiskSpec) -> Mesh:
    """Structured concentric-ring mesh of a disk, boundary DIRICHLET(1)."""
    spec.validate()
    if spec.split:
        return mesh_disk_mixed(spec)
    c = np.asarray(spec.center, dtype=float)
    n_r = max(2, int(math.ceil(spec.radius / spec.mesh_size - 1e-9)))
    radii = spec.radius * np.arange(n_r + 1) / n_r
    counts = np.maximum(6, np.round(2 * np.pi * radii[1:] / spec.mesh_size)).astype(int)
    counts = np.maximum.accumulate(counts)
    pts = [c[None, :]]
    ring_ids, ring_ang = [np.array([0])], [np.array([0.0])]
    nxt = 1
    for r, n in zip(radii[1:], counts):
        ang = 2 * np.pi * np.arange(n) / n
        pts.append(c + np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
        ring_ids.append(np.arange(nxt, nxt + n))
        ring_ang.append(ang)
        nxt += n
    nodes = np.concatenate(pts)
    tris = []
    for k in range(n_r):
        b = np.append(ring_ids[k + 1], ring_ids[k + 1][0])
        ab = np.append(ring_ang[k + 1], 2 * np.pi)
        if k == 0:
            tris += [(0, b[j], b[j + 1]) for j in range(len(b) - 1)]
            continue
        a = np.append(ring_ids[k], ring_ids[k][0])
        aa = np.append(ring_ang[k], 2 * np.pi)
        tris += _zipper(a, aa, b, ab, nodes)
    tris = _lawson_flip(tris, nodes)
    bedges = boundary_edges_of(tris)
    return Mesh(nodes=nodes, triangles=tris, boundary_edges=bedges,
                edge_tags=np.ones(len(bedges), dtype=np.int64),
                tag_kinds={1: DIRICHLET}, corner_node=None,
                info=dict(kind="disk", center=c, radius=spec.radius))


# ---------------------------------------------------------------------------
# size-field driven unstructured meshing


def _point_segment_distance(pts, a, b):
    ab = b - a
    t = np.clip(((pts - a) @ ab) / float(ab @ ab), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(pts - proj).T)


def _segments_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4 and o1 != 0 and o2 != 0 and o3 != 0 and o4 != 0:
        return True
    return False


def _march(length, size_at, max_pts=200000):
    """Parameter positions in [0, length] spaced by the local size."""
    pos = [0.0]
    s = 0.0
    while True:
        step = size_at(s)
        for _ in range(3):
            step = min(step, size_at(min(s + step, length)))
        if s + step >= length - 1e-12 * length:
            break
        s += step
        pos.append(s)
        if len(pos) > max_pts:
            raise InvalidSpecError("boundary discretisation too fine")
    pos = np.array(pos + [length])
    # merge a short last gap into its neighbour
    if len(pos) > 2 and (pos[-1] - pos[-2]) < 0.5 * (pos[-2] - pos[-3]):
        pos = np.delete(pos, -2)
    return pos


def _triangulate(loop_pts, seg_tags, size_fn, min_angle=30.0, max_passes=12):
    """Constrained Delaunay mesh of one closed loop, refined to ``size_fn``."""
    import triangle as tr

    n = len(loop_pts)
    segs = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    inp = dict(vertices=loop_pts, segments=segs)
    q = f"q{min_angle:g}"
    out = tr.triangulate(inp, "p" + q + "Y")
    for _ in range(max_passes):
        v, t = out["vertices"], out["triangles"]
        p = v[t]
        area = 0.5 * np.abs((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
        target = (math.sqrt(3) / 4) * size_fn(p.mean(axis=1)) ** 2
        if np.all(area <= 1.5 * target):
            break
        nxt = dict(vertices=v, triangles=t, segments=segs,
                   triangle_max_area=np.minimum(target, area).reshape(-1, 1))
        out = tr.triangulate(nxt, "rp" + q + "Ya")
    nodes = np.asarray(out["vertices"], dtype=float)
    tris = _orient(out["triangles"], nodes)
    bedges = boundary_edges_of(tris)
    seg_tag = {}
    for k in range(n):
        seg_tag[(min(k, (k + 1) % n), max(k, (k + 1) % n))] = seg_tags[k]
    tags = np.array([seg_tag[(min(a, b), max(a, b))] for a, b in bedges], dtype=np.int64)
    return nodes, tris, bedges, tags


def polygon_size_field(spec: PolygonSpec) -> Callable:
    p = spec.points
    h = spec.mesh_size
    parts = []
    if spec.layer_width is not None:
        h1, g = spec.layer_width, spec.layer_growth

        def layer(x):
            d = np.full(len(x), np.inf)
            for j in range(spec.n):
                d = np.minimum(d, _point_segment_distance(x, p[j], p[(j + 1) % spec.n]))
            return h1 + g * d

        parts.append(layer)
    if spec.reentrant_index is not None and spec.beta > 1.0:
        c = p[spec.reentrant_index]
        L = spec.corner_scale or spec.diameter()
        hc = min(h, spec.layer_width) if spec.layer_width else h
        beta = spec.beta
        r1 = L * (hc / L) ** beta

        def corner(x):
            r = np.maximum(np.hypot(*(x - c).T), r1)
            return hc * (r / L) ** (1.0 - 1.0 / beta)

        parts.append(corner)

    def size(x):
        x = np.atleast_2d(x)
        s = np.full(len(x), h)
        for f in parts:
            s = np.minimum(s, f(x))
        return s

    return size


def mesh_polygon(spec: PolygonSpec) -> Mesh:
    """Graded mesh of a straight polygon; every side is DIRICHLET(side+1)."""
    spec.validate()
    size = polygon_size_field(spec)
    p = spec.points
    loop, tags, vertex_ids = [], [], []
    for j in range(spec.n):
        a, b = p[j], p[(j + 1) % spec.n]
        L = float(np.hypot(*(b - a)))
        pos = _march(L, lambda s: float(size(a + (b - a) * (s / L))[0]))
        vertex_ids.append(len(loop))
        for s in pos[:-1]:
            loop.append(a + (b - a) * (s / L))
            tags.append(j + 1)
    nodes, tris, bedges, etags = _triangulate(np.array(loop), tags, size)
    corner = None if spec.reentrant_index is None else vertex_ids[spec.reentrant_index]
    info = dict(kind="polygon", spec=spec, vertex_nodes=np.array(vertex_ids))
    return Mesh(nodes=nodes, triangles=tris, boundary_edges=bedges, edge_tags=etags,
                tag_kinds={j + 1: DIRICHLET for j in range(spec.n)},
                corner_node=corner, info=info)


def mesh_disk_mixed(spec: DiskSpec) -> Mesh:
    """Split disk: left half-circle DIRICHLET(1), right half-circle NEUMANN(2)."""
    spec.validate()
    if not spec.split:
        raise InvalidSpecError("mesh_disk_mixed requires a split DiskSpec")
    c = np.asarray(spec.center, dtype=float)
    R = spec.radius
    h = spec.mesh_size
    hmin = h * spec.min_size_ratio
    refine = [(np.asarray(pt, dtype=float), float(sc)) for pt, sc in spec.refine_points]

    def size(x):
        x = np.atleast_2d(x)
        s = np.full(len(x), h)
        for pt, sc in refine:
            d = np.hypot(*(x - pt).T)
            s = np.minimum(s, np.maximum(hmin, h * d / sc))
        return s

    def on_circle(t):
        return c + R * np.array([np.cos(t), np.sin(t)])

    loop, tags = [], []
    # left half: theta from pi/2 to 3pi/2 (counterclockwise), then right half
    for t0, tag in ((0.5 * np.pi, 1), (1.5 * np.pi, 2)):
        pos = _march(np.pi * R, lambda s: float(size(on_circle(t0 + s / R))[0]))
        for s in pos[:-1]:
            loop.append(on_circle(t0 + s / R))
            tags.append(tag)
    loop = np.array(loop)
    nodes, tris, bedges, etags = _triangulate(loop, tags, size)
    return Mesh(nodes=nodes, triangles=tris, boundary_edges=bedges, edge_tags=etags,
                tag_kinds={1: DIRICHLET, 2: NEUMANN}, corner_node=None,
                info=dict(kind="disk_mixed", center=c, radius=R,
                          junctions=np.array([c + [0, R], c - [0, R]])))
