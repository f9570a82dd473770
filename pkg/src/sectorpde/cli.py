"""Command-line entry point.

Every subcommand writes a JSON report (embedding the resolved config) and
CSV/VTK artifacts to ``--out``.  Exit status: 0 success, 1 a reported check
failed, 2 configuration or solver error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ORACLES, RunConfig, resolve_domain
from .errors import SectorPDEError

log = logging.getLogger("sectorpde")


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _angle(ns):
    if getattr(ns, "theta0_deg", None) is not None:
        return math.radians(ns.theta0_deg)
    return getattr(ns, "theta0", None)


def _add_theta(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--theta0-deg", type=float, help="sector half-opening in degrees")
    g.add_argument("--theta0", type=float, help="sector half-opening in radians")


def _add_common(p):
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="cap on concurrent solves")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sectorpde", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("minimal", help="minimal solutions on truncated sectors")
    _add_theta(p)
    p.add_argument("--radii", type=_floats, required=True)
    p.add_argument("--h", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--core-radius", type=float)
    p.add_argument("--no-vtk", action="store_true")
    _add_common(p)

    p = sub.add_parser("phistar", help="supersolution on the split plane")
    p.add_argument("--h", type=float)
    p.add_argument("--ks", type=_floats)
    p.add_argument("--stop-tol", type=float)
    _add_common(p)

    p = sub.add_parser("family", help="member of the non-uniqueness family")
    _add_theta(p)
    p.add_argument("--mu-minus", type=float)
    p.add_argument("--mu-plus", type=float)
    p.add_argument("--R", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--vtk", action="store_true")
    _add_common(p)

    for name, helptext in (("plasma", "one plasma equilibrium"),
                           ("plasma-sweep", "epsilon sweep with scaling fits"),
                           ("sandwich", "external-potential orderings")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--domain", required=True, help="square, lshape, or a polygon JSON file")
        p.add_argument("--h", type=float)
        p.add_argument("--layer-factor", type=float)
        p.add_argument("--phi-e", type=_floats, help="a,b,c for phi_e = a + b x + c y")
        if name == "plasma":
            p.add_argument("--eps", type=float, required=True)
            p.add_argument("--vtk", action="store_true")
        elif name == "plasma-sweep":
            p.add_argument("--eps", type=_floats, required=True)
            p.add_argument("--Lambda", type=_floats, help="reference bracket lo,hi")
        else:
            p.add_argument("--kappa", type=float, required=True)
        _add_common(p)

    p = sub.add_parser("oracle", help="closed forms and the radial shooting oracle")
    p.add_argument("kind", choices=ORACLES)
    for flag in ("--eta", "--a", "--b", "--eps", "--R", "--h", "--x-max"):
        p.add_argument(flag, type=float)
    p.add_argument("--n-grid", type=int)
    _add_common(p)

    p = sub.add_parser("mesh", help="generate and export a mesh")
    p.add_argument("kind", choices=("sector", "polygon", "disk"))
    _add_theta(p, required=False)
    p.add_argument("--R", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--domain")
    p.add_argument("--radius", type=float)
    _add_common(p)

    p = sub.add_parser("run", help="execute a JSON config file")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=None)
    return ap


def config_from_args(ns) -> RunConfig:
    if ns.command == "run":
        cfg = RunConfig.from_file(ns.config)
        if ns.out is not None:
            cfg.out = ns.out
        if ns.jobs is not None and cfg.command in ("minimal", "plasma-sweep"):
            cfg.params["jobs"] = ns.jobs
        return cfg
    c = ns.command
    p = {}
    if c in ("minimal", "family") or (c == "mesh" and _angle(ns) is not None):
        p["theta0"] = _angle(ns)
    names = {"minimal": ("radii", "h", "beta", "core_radius"),
             "phistar": ("h", "ks", "stop_tol"),
             "family": ("mu_minus", "mu_plus", "R", "h"),
             "plasma": ("domain", "eps", "h", "layer_factor", "phi_e"),
             "plasma-sweep": ("domain", "eps", "h", "layer_factor", "phi_e", "Lambda"),
             "sandwich": ("domain", "kappa", "h", "layer_factor", "phi_e"),
             "oracle": ("kind", "eta", "a", "b", "eps", "R", "h", "x_max", "n_grid"),
             "mesh": ("kind", "R", "h", "beta", "domain", "radius")}[c]
    for n in names:
        v = getattr(ns, n, None)
        if v is not None:
            p[n] = v
    if c == "minimal":
        p["vtk"] = not ns.no_vtk
    if c in ("family", "plasma"):
        p["vtk"] = bool(ns.vtk)
    if c in ("minimal", "plasma-sweep") and ns.jobs is not None:
        p["jobs"] = ns.jobs
    return RunConfig(c, p, ns.out)


class _Potential:
    """Picklable a + b x + c y (sweeps may run in worker processes)."""

    def __init__(self, coef):
        self.a, self.b, self.c = map(float, coef)

    def __call__(self, x, y):
        return self.a + self.b * np.asarray(x) + self.c * np.asarray(y)


def _potential(coef):
    return None if not coef else _Potential(coef)


# ---------------------------------------------------------------------------
# commands; each returns (report dict, passed flag)


def _cmd_minimal(p, out: Path):
    from .sector_study import sweep_R

    st = sweep_R(p["theta0"], p["radii"], h=p["h"], beta=p["beta"], core_radius=p["core_radius"],
                 jobs=p["jobs"])
    rows = []
    for R in st.radii:
        d = st.lambdas.get(R)
        f = st.fits.get(R)
        rows.append([R, None if d is None else d.value, None if d is None else d.bracket[0],
                     None if d is None else d.bracket[1], None if f is None else f.value])
        if p["vtk"] and R in st.fields:
            io.write_field_vtk(out / f"uR_{R:g}.vtk", st.fields[R])
    io.write_table(out / "lambda.csv", ("R", "lambda_dual", "dual_lo", "dual_hi", "lambda_fit"), rows)
    passed = all(c.passed for c in st.checks.values()) and not st.failures
    if st.monotone_in_R is not None:
        passed = passed and st.monotone_in_R.passed
    return "study.json", st.to_dict(), passed


def _phistar_points():
    xs = np.linspace(-4.0, 4.0, 9)
    ys = np.array([0.0, 0.5, 1.0, 2.0, 4.0])
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def _cmd_phistar(p, out: Path):
    from .conformal import build_phistar, phistar_checks

    pts = np.asarray(p["points"], dtype=float) if p["points"] else _phistar_points()
    res = build_phistar(pts, ks=p["ks"], h=p["h"], stop_tol=p["stop_tol"], run_all=p["run_all"])
    io.write_table(out / "phistar.csv", ("x", "y", "phi_star", "k", "delta_k"),
                   ([x, y, v, res.k, d] for (x, y), v, d in zip(pts, res.values, res.delta)))
    checks = phistar_checks(res, pts)
    rep = {"k": res.k, "levels": sorted(res.evaluator.fields), "m": res.evaluator.m,
           "max_delta": float(np.nanmax(np.abs(res.delta))) if np.isfinite(res.delta).any() else None,
           "nodes": res.evaluator.mesh.n_nodes, "checks": checks}
    return "phistar.json", rep, all(c["passed"] for c in checks.values())


def _cmd_family(p, out: Path):
    from .geometry import SectorSpec, mesh_sector
    from .nonlinear_solve import solve_semilinear
    from .sector_study import FamilyParams, family_checks, family_mu

    mesh = mesh_sector(SectorSpec(p["theta0"], p["R"], p["h"], p["beta"]))
    u, _ = solve_semilinear(mesh)
    fam = family_mu(p["theta0"], FamilyParams(p["mu_minus"], p["mu_plus"]), mesh=mesh)
    checks = family_checks(fam, u)
    r = np.array([1e-3, 1e-2, 0.1, 1.0])
    prof = fam.evaluate(np.column_stack([r, 0 * r]))
    io.write_table(out / "family_profile.csv", ("r", "phi_mu", "pi_r_alpha_phi_mu"),
                   zip(r, prof, math.pi * r ** fam.alpha * prof))
    if p["vtk"]:
        io.write_field_vtk(out / "vmu.vtk", fam.v)
    rep = {"alpha": fam.alpha, "mu_minus": p["mu_minus"], "mu_plus": p["mu_plus"],
           "nodes": mesh.n_nodes, "max_abs_v_minus_uR": float(np.abs(fam.v.values - u.values).max()),
           "checks": {k: v.to_dict() for k, v in checks.items()}}
    return "family.json", rep, all(c.passed for c in checks.values())


def _cmd_plasma(p, out: Path):
    from .plasma import solve_plasma

    dom = resolve_domain(p["domain"])
    case = solve_plasma(dom, p["eps"], _potential(p["phi_e"]), p["layer_factor"])
    if p["vtk"]:
        io.write_field_vtk(out / "phi.vtk", case.field)
    rep = case.to_dict()
    return "plasma.json", rep, bool(rep["min_phi"] >= -1e-9 and case.report.converged)


def _cmd_plasma_sweep(p, out: Path):
    from .plasma import ScalingReport, sweep_eps

    dom = resolve_domain(p["domain"])
    rep = sweep_eps(dom, p["eps"], _potential(p["phi_e"]), p["layer_factor"],
                    Lambda=p["Lambda"], jobs=p["jobs"])
    io.write_table(out / "scaling.csv", ScalingReport.COLUMNS + ("mass_slope", "lambda_slope"),
                   (row + [rep.mass_slope, rep.lambda_slope] for row in rep.table()))
    passed = not rep.failures and all(r["resolved"] for r in rep.rows)
    return "scaling.json", rep.to_dict(), passed


def _cmd_sandwich(p, out: Path):
    from .plasma import sandwich_check

    dom = resolve_domain(p["domain"])
    rep = sandwich_check(dom, p["kappa"], _potential(p["phi_e"]), p["layer_factor"])
    flags = [rep.get("mass_ordered")]
    if "lambda_ordered" in rep:
        flags.append(rep["lambda_ordered"])
    return "sandwich.json", rep, bool(rep["complete"] and all(flags))


def _cmd_oracle(p, out: Path):
    from . import oracles

    kind = p["kind"]
    if kind in ("radial-ball", "radial-annulus"):
        if kind == "radial-ball":
            prof = oracles.radial_bvp(oracles.BALL, p["eta"], p["eps"], n_grid=p["n_grid"])
        else:
            prof = oracles.radial_bvp(oracles.ANNULUS, (p["a"], p["b"]), p["eps"], n_grid=p["n_grid"])
        prof.to_csv(out / "profile.csv")
        chk = oracles.radial_identity_check(prof)
        rep = {"boundary_derivative": prof.boundary_derivative, "meta": prof.meta, "checks": chk}
        passed = chk["identity_residual"] <= 1e-8
        return "oracle.json", rep, passed
    if kind == "disk":
        R = p["R"]
        x = np.linspace(0.0, R, p["n_grid"])
        v = oracles.disk_closed_form(R, x)
        io.write_table(out / "profile.csv", ("r", "u"), zip(x, v))
        rep = {"R": R, "A": oracles.disk_A(R), "center": float(v[0]),
               "center_alt": oracles.disk_center_alt(R), "mass": oracles.disk_mass(R)}
        if p["h"]:
            from .geometry import DiskSpec, mesh_disk
            from .nonlinear_solve import solve_semilinear

            mesh = mesh_disk(DiskSpec((0.0, 0.0), R, mesh_size=p["h"]))
            u, _ = solve_semilinear(mesh)
            exact = oracles.disk_closed_form(R, np.minimum(np.hypot(*mesh.nodes.T), R))
            rep["fem_nodes"] = mesh.n_nodes
            rep["fem_max_error"] = float(np.abs(u.values - exact).max())
        return "oracle.json", rep, True
    x = np.linspace(0.0, p["x_max"], p["n_grid"])
    io.write_table(out / "profile.csv", ("x1", "u"), zip(x, oracles.halfplane_profile(x)))
    return "oracle.json", {"x_max": p["x_max"]}, True


def _cmd_mesh(p, out: Path):
    from .geometry import DiskSpec, SectorSpec, mesh_disk, mesh_polygon, mesh_sector, validate_mesh

    kind = p["kind"]
    if kind == "sector":
        m = mesh_sector(SectorSpec(p["theta0"], p["R"], p["h"] or 0.1, p["beta"]))
    elif kind == "disk":
        m = mesh_disk(DiskSpec(tuple(p["center"]), p["radius"], mesh_size=p["h"] or 0.05))
    else:
        m = mesh_polygon(resolve_domain(p["domain"]))
    io.write_mesh_vtk(out / "mesh.vtk", m)
    problems = validate_mesh(m)
    rep = {"kind": kind, "nodes": m.n_nodes, "triangles": m.n_triangles,
           "boundary_edges": int(len(m.boundary_edges)), "problems": problems}
    return "mesh.json", rep, not problems


COMMANDS = {"minimal": _cmd_minimal, "phistar": _cmd_phistar, "family": _cmd_family,
            "plasma": _cmd_plasma, "plasma-sweep": _cmd_plasma_sweep, "sandwich": _cmd_sandwich,
            "oracle": _cmd_oracle, "mesh": _cmd_mesh}


def run_command(argv=None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns).resolved()
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        name, report, passed = COMMANDS[cfg.command](cfg.params, out)
        io.write_json(out / name, {"config": cfg.to_dict(), "passed": bool(passed), "report": report})
    except (SectorPDEError, ValueError, OSError) as exc:
        print(f"sectorpde: error: {exc}", file=sys.stderr)
        return 2
    if not passed:
        print(f"sectorpde: {cfg.command}: some checks failed (see {out / name})", file=sys.stderr)
        return 1
    return 0


def main():  # pragma: no cover
    sys.exit(run_command())


if __name__ == "__main__":  # pragma: no cover
    main()
