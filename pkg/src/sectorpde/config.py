"""Run configuration: JSON schema, validation and domain resolution."""

from __future__ import annotations

import copy
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .errors import InvalidSpecError
from .geometry import PolygonSpec, lshape, unit_square

COMMANDS = ("minimal", "phistar", "family", "plasma", "plasma-sweep", "sandwich", "oracle", "mesh")
ORACLES = ("radial-ball", "radial-annulus", "disk", "halfplane")
MESH_KINDS = ("sector", "polygon", "disk")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_opt_pos = {"type": ["number", "null"], "exclusiveMinimum": 0}
_pos_list = {"type": "array", "items": _pos, "minItems": 1}
_theta = {"type": "number", "exclusiveMinimum": 0, "maximum": math.pi}
_domain = {"oneOf": [
    {"type": "string"},
    {"type": "object", "required": ["vertices"],
     "properties": {"vertices": {"type": "array", "minItems": 3,
                                 "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
                    "reentrant_index": {"type": ["integer", "null"], "minimum": 0},
                    "h": _pos, "beta": _opt_pos}},
]}
_phi_e = {"type": ["array", "null"], "items": _num, "minItems": 3, "maxItems": 3}

PARAMS = {
    "minimal": {"required": ["theta0", "radii"],
                "properties": {"theta0": _theta, "radii": _pos_list, "h": _pos, "beta": _opt_pos,
                               "core_radius": _opt_pos, "vtk": {"type": "boolean"},
                               "jobs": {"type": "integer", "minimum": 1}}},
    "phistar": {"properties": {"h": _pos, "ks": {"type": "array", "items": {"type": "number", "minimum": 0},
                                                 "minItems": 1},
                               "stop_tol": _pos, "run_all": {"type": "boolean"},
                               "points": {"type": ["array", "null"],
                                          "items": {"type": "array", "items": _num,
                                                    "minItems": 2, "maxItems": 2}}}},
    "family": {"required": ["theta0"],
               "properties": {"theta0": _theta, "mu_minus": {"type": "number", "minimum": 0},
                              "mu_plus": {"type": "number", "minimum": 0}, "R": _pos, "h": _pos,
                              "beta": _opt_pos, "vtk": {"type": "boolean"}}},
    "plasma": {"required": ["domain", "eps"],
               "properties": {"domain": _domain, "eps": _pos, "phi_e": _phi_e, "h": _opt_pos,
                              "layer_factor": _pos, "vtk": {"type": "boolean"}}},
    "plasma-sweep": {"required": ["domain", "eps"],
                     "properties": {"domain": _domain, "eps": {"type": "array", "items": _pos, "minItems": 3},
                                    "phi_e": _phi_e, "h": _opt_pos, "layer_factor": _pos,
                                    "Lambda": {"type": ["array", "null"], "items": _num,
                                               "minItems": 2, "maxItems": 2},
                                    "jobs": {"type": "integer", "minimum": 1}}},
    "sandwich": {"required": ["domain", "kappa"],
                 "properties": {"domain": _domain, "kappa": _pos, "phi_e": _phi_e, "h": _opt_pos,
                                "layer_factor": _pos}},
    "oracle": {"required": ["kind"],
               "properties": {"kind": {"enum": list(ORACLES)}, "eta": _pos, "a": _pos, "b": _pos,
                              "eps": _pos, "R": _pos, "h": _opt_pos, "x_max": _pos,
                              "n_grid": {"type": "integer", "minimum": 2}}},
    "mesh": {"required": ["kind"],
             "properties": {"kind": {"enum": list(MESH_KINDS)}, "theta0": _theta, "R": _pos, "h": _opt_pos,
                            "beta": _opt_pos, "domain": _domain, "radius": _pos,
                            "center": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}}},
}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "sectorpde run configuration",
    "type": "object",
    "required": ["command", "params"],
    "additionalProperties": False,
    "properties": {"command": {"enum": list(COMMANDS)}, "out": {"type": "string"},
                   "params": {"type": "object"}},
    "allOf": [{"if": {"properties": {"command": {"const": c}}},
               "then": {"properties": {"params": dict(type="object", additionalProperties=False, **p)}}}
              for c, p in PARAMS.items()],
}

DEFAULTS = {
    "minimal": {"h": 0.1, "beta": None, "core_radius": None, "vtk": True, "jobs": 1},
    "phistar": {"h": 0.02, "ks": [0, 2, 4, 6], "stop_tol": 1e-3, "run_all": True, "points": None},
    "family": {"mu_minus": 0.0, "mu_plus": 0.0, "R": 20.0, "h": 0.1, "beta": None, "vtk": False},
    "plasma": {"phi_e": None, "h": None, "layer_factor": 0.1, "vtk": False},
    "plasma-sweep": {"phi_e": None, "h": None, "layer_factor": 0.1, "Lambda": None, "jobs": 1},
    "sandwich": {"phi_e": [0.0, 1.0, 0.0], "h": None, "layer_factor": 0.1},
    "oracle": {"eta": 1.0, "a": 0.5, "b": 2.0, "eps": 1.0, "R": 1.0, "h": None, "x_max": 5.0,
               "n_grid": 201},
    "mesh": {"theta0": 0.75 * math.pi, "R": 20.0, "h": None, "beta": None, "domain": "lshape",
             "radius": 1.0, "center": [0.0, 0.0]},
}


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    out: str = "."

    def to_dict(self) -> dict:
        return {"command": self.command, "out": self.out, "params": copy.deepcopy(self.params)}

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        validate_document(doc)
        return cls(doc["command"], dict(doc["params"]), doc.get("out", "."))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise InvalidSpecError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    def resolved(self) -> "RunConfig":
        """Defaults filled in, domain expanded, preconditions checked."""
        p = dict(DEFAULTS.get(self.command, {}))
        p.update({k: v for k, v in self.params.items() if v is not None or k not in p})
        cfg = RunConfig(self.command, p, self.out)
        validate_document(cfg.to_dict())
        if "domain" in p and self.command != "mesh" or (self.command == "mesh" and p["kind"] == "polygon"):
            dom = resolve_domain(p["domain"], p.get("h"))
            p["domain"] = dom.to_json()
        _check_preconditions(cfg)
        return cfg


def validate_document(doc: dict):
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path)
        raise InvalidSpecError(f"config error at '{where}': {exc.message}") from exc


def resolve_domain(domain, h=None) -> PolygonSpec:
    """'square', 'lshape', a JSON file path, or an inline polygon document."""
    if isinstance(domain, str):
        if domain in ("square", "unit_square"):
            spec = unit_square(h or 0.05)
        elif domain in ("lshape", "L"):
            spec = lshape(h or 0.05)
        elif Path(domain).exists():
            spec = PolygonSpec.from_json(domain)
        else:
            raise InvalidSpecError(f"domain file {domain!r} does not exist")
    else:
        spec = PolygonSpec.from_json(domain)
    if h is not None:
        spec = PolygonSpec(spec.vertices, spec.reentrant_index, float(h), spec.grading_exponent)
    spec.validate()
    return spec


def _check_preconditions(cfg: RunConfig):
    p, c = cfg.params, cfg.command
    if c == "minimal":
        r = p["radii"]
        if any(b <= a for a, b in zip(r, r[1:])):
            raise InvalidSpecError("radii must be strictly increasing")
    if c == "plasma-sweep":
        e = p["eps"]
        if any(b >= a for a, b in zip(e, e[1:])):
            raise InvalidSpecError("eps list must be strictly decreasing")
    if c == "family":
        alpha = math.pi / (2 * p["theta0"])
        if p["mu_minus"] > 0 and alpha >= 1:
            raise InvalidSpecError("mu_minus > 0 needs a reentrant sector")
    if c == "oracle" and p["kind"] == "radial-annulus" and not p["a"] < p["b"]:
        raise InvalidSpecError("annulus needs a < b")
    if c == "phistar" and p["points"]:
        if any(y < 0 for _, y in p["points"]):
            raise InvalidSpecError("phi* sample points must have y >= 0")
    out = Path(cfg.out)
    probe = out if out.exists() else out.parent if str(out.parent) else Path(".")
    while not probe.exists():
        probe = probe.parent
    if not os.access(probe, os.W_OK):
        raise InvalidSpecError(f"output directory {cfg.out} is not writable")


def schema_text() -> str:
    return json.dumps(SCHEMA, indent=2) + "\n"
