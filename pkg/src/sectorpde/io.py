"""Deterministic text formats: JSON reports, CSV tables, legacy VTK meshes and fields.

Every float is written in fixed scientific notation with 9 significant
digits, so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .discretization import Field
from .geometry import Mesh

DIGITS = 9


def fmt(x) -> str:
    """Fixed scientific notation, 9 significant digits; '' for None."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        x = 0.0  # drop the sign of -0.0
    return f"{x:.{DIGITS - 1}e}"


def round_sig(values) -> np.ndarray:
    """Values as they come back after a write/read cycle."""
    v = np.asarray(values, dtype=float)
    return np.array([float(fmt(x)) for x in v.ravel()]).reshape(v.shape)


# ---------------------------------------------------------------------------
# JSON


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _encode(obj, indent, level) -> str:
    import json

    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt(obj) if math.isfinite(obj) else "null"
    if obj is None:
        return "null"
    return json.dumps(obj)


def dumps(obj, indent: int = 2) -> str:
    """JSON text with insertion-ordered keys and fixed-format floats."""
    return _encode(_plain(obj), indent, 0) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


# ---------------------------------------------------------------------------
# CSV


def write_table(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in rows:
            w.writerow([c if isinstance(c, str) else (str(c) if isinstance(c, (int, np.integer))
                                                      and not isinstance(c, bool) else fmt(c))
                        for c in row])
    return path


def read_table(path):
    """(header, rows) with numeric cells parsed as floats, empty cells as None."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = []
        for row in r:
            out = []
            for c in row:
                if c == "":
                    out.append(None)
                    continue
                try:
                    out.append(float(c))
                except ValueError:
                    out.append(c)
            rows.append(out)
    return header, rows


def write_field_csv(path, field: Field) -> Path:
    p = field.mesh.nodes
    return write_table(path, ("node", "x", "y", "value"),
                       ([i, p[i, 0], p[i, 1], field.values[i]] for i in range(field.mesh.n_nodes)))


def read_field_csv(path):
    """(node ids, points, values) from a ``node,x,y,value`` file."""
    header, rows = read_table(path)
    if header != ["node", "x", "y", "value"]:
        raise ValueError(f"unexpected field CSV header {header}")
    a = np.array(rows, dtype=float).reshape(-1, 4)
    return a[:, 0].astype(int), a[:, 1:3], a[:, 3]


# ---------------------------------------------------------------------------
# legacy VTK


def _vtk_points(fh, nodes):
    fh.write(f"POINTS {len(nodes)} double\n")
    for x, y in nodes:
        fh.write(f"{fmt(x)} {fmt(y)} {fmt(0.0)}\n")


def write_vtk(path, mesh: Mesh, point_data: Optional[dict] = None,
              cell_data: Optional[dict] = None, title: str = "sectorpde") -> Path:
    """Triangle mesh as legacy ASCII UNSTRUCTURED_GRID with scalar data."""
    path = Path(path)
    tris = mesh.triangles
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title.replace("\n", " ")[:255] + "\n")
        fh.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        _vtk_points(fh, mesh.nodes)
        fh.write(f"CELLS {len(tris)} {4 * len(tris)}\n")
        for a, b, c in tris:
            fh.write(f"3 {a} {b} {c}\n")
        fh.write(f"CELL_TYPES {len(tris)}\n")
        fh.write("5\n" * len(tris))
        if cell_data:
            fh.write(f"CELL_DATA {len(tris)}\n")
            _vtk_scalars(fh, cell_data)
        if point_data:
            fh.write(f"POINT_DATA {mesh.n_nodes}\n")
            _vtk_scalars(fh, point_data)
    return path


def _vtk_scalars(fh, data: dict):
    for name, vals in data.items():
        vals = np.asarray(vals)
        if vals.dtype.kind in "iub":
            fh.write(f"SCALARS {name} int 1\nLOOKUP_TABLE default\n")
            fh.writelines(f"{int(v)}\n" for v in vals)
        else:
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            fh.writelines(fmt(v) + "\n" for v in vals)


def write_boundary_vtk(path, mesh: Mesh) -> Path:
    """Companion line mesh of the boundary edges with their tags as CELL_DATA."""
    path = Path(path)
    e = mesh.boundary_edges
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\nboundary edges\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        _vtk_points(fh, mesh.nodes)
        fh.write(f"CELLS {len(e)} {3 * len(e)}\n")
        for a, b in e:
            fh.write(f"2 {a} {b}\n")
        fh.write(f"CELL_TYPES {len(e)}\n")
        fh.write("3\n" * len(e))
        fh.write(f"CELL_DATA {len(e)}\n")
        _vtk_scalars(fh, {"tag": np.asarray(mesh.edge_tags, dtype=np.int64)})
    return path


def write_mesh_vtk(path, mesh: Mesh) -> tuple:
    """Triangles to ``path``; boundary lines with tags to ``<stem>_boundary.vtk``."""
    path = Path(path)
    a = write_vtk(path, mesh, title="mesh")
    b = write_boundary_vtk(path.with_name(path.stem + "_boundary.vtk"), mesh)
    return a, b


def write_field_vtk(path, field: Field) -> Path:
    return write_vtk(path, field.mesh, {field.name or "value": field.values}, title=field.name)


def export_field(field: Field, fmt_name: str, path) -> Path:
    """Write a field as "VTK" or "CSV"."""
    kind = fmt_name.upper()
    if kind == "VTK":
        return write_field_vtk(path, field)
    if kind == "CSV":
        return write_field_csv(path, field)
    raise ValueError("format must be VTK or CSV")


def read_vtk(path) -> dict:
    """Parse files written by :func:`write_vtk` / :func:`write_boundary_vtk`.

    Returns {"points", "cells", "cell_types", "point_data", "cell_data"}.
    """
    tokens = Path(path).read_text().split("\n")
    if not tokens[0].startswith("# vtk DataFile Version"):
        raise ValueError("not a legacy VTK file")
    it = iter(tokens[2:])
    out = {"point_data": {}, "cell_data": {}}
    target = None
    for line in it:
        parts = line.split()
        if not parts:
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            pts = np.array([next(it).split() for _ in range(n)], dtype=float)
            out["points"] = pts[:, :2]
        elif key == "CELLS":
            n = int(parts[1])
            out["cells"] = [list(map(int, next(it).split()[1:])) for _ in range(n)]
        elif key == "CELL_TYPES":
            n = int(parts[1])
            out["cell_types"] = [int(next(it)) for _ in range(n)]
        elif key == "CELL_DATA":
            target, count = out["cell_data"], int(parts[1])
        elif key == "POINT_DATA":
            target, count = out["point_data"], int(parts[1])
        elif key == "SCALARS":
            name, kind = parts[1], parts[2]
            next(it)  # LOOKUP_TABLE
            vals = [next(it) for _ in range(count)]
            target[name] = np.array(vals, dtype=int if kind == "int" else float)
    return out
