import json
import math
from pathlib import Path

import jsonschema
import pytest

from sectorpde import io
from sectorpde.cli import run_command
from sectorpde.config import SCHEMA, RunConfig, resolve_domain, schema_text
from sectorpde.errors import InvalidSpecError


def test_oracle_radial_ball(tmp_path):
    assert run_command(["oracle", "radial-ball", "--eta", "1", "--eps", "1", "--out", str(tmp_path)]) == 0
    header, rows = io.read_table(tmp_path / "profile.csv")
    assert header == ["r", "v", "v'"]
    assert rows[-1][0] == 1.0
    assert rows[-1][2] == pytest.approx(0.449490, abs=1e-6)
    rep = json.loads((tmp_path / "oracle.json").read_text())
    assert rep["config"]["params"]["eta"] == 1.0 and rep["passed"] is True


def test_oracle_disk_and_halfplane(tmp_path):
    assert run_command(["oracle", "disk", "--R", "1", "--h", "0.1", "--out", str(tmp_path / "d")]) == 0
    rep = json.loads((tmp_path / "d" / "oracle.json").read_text())["report"]
    assert rep["fem_max_error"] < 2e-3
    assert run_command(["oracle", "halfplane", "--x-max", "3", "--out", str(tmp_path / "h")]) == 0


def test_mesh_command(tmp_path):
    assert run_command(["mesh", "polygon", "--domain", "lshape", "--h", "0.2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "mesh.vtk").exists() and (tmp_path / "mesh_boundary.vtk").exists()
    rep = json.loads((tmp_path / "mesh.json").read_text())["report"]
    d = io.read_vtk(tmp_path / "mesh.vtk")
    assert len(d["cells"]) == rep["triangles"]
    assert run_command(["mesh", "sector", "--theta0-deg", "135", "--R", "3", "--h", "0.3",
                        "--out", str(tmp_path / "s")]) == 0


def test_minimal_small(tmp_path):
    code = run_command(["minimal", "--theta0-deg", "135", "--radii", "2,3", "--h", "0.25",
                        "--out", str(tmp_path)])
    assert code in (0, 1)  # 1 when a property check fails on the coarse mesh
    doc = json.loads((tmp_path / "study.json").read_text())
    assert doc["config"]["params"]["theta0"] == pytest.approx(0.75 * math.pi)
    assert doc["report"]["Lambda"]["bracket"][0] > 0
    assert (tmp_path / "uR_3.vtk").exists() and (tmp_path / "lambda.csv").exists()


def test_exit_codes(tmp_path, capsys):
    assert run_command(["minimal", "--theta0-deg", "135", "--radii", "5,2", "--out", str(tmp_path)]) == 2
    assert run_command(["nonsense"]) == 2
    assert run_command(["oracle", "radial-annulus", "--a", "2", "--b", "1", "--out", str(tmp_path)]) == 2
    assert run_command(["plasma", "--domain", "missing.json", "--eps", "0.5", "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"command": "oracle", "params": {"kind": "disk", "colour": 1}}))
    assert run_command(["run", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_run_config_file_and_determinism(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "plasma", "out": str(tmp_path / "o"),
                               "params": {"domain": "square", "eps": 0.5, "h": 0.1}}))
    assert run_command(["run", str(cfg)]) == 0
    first = (tmp_path / "o" / "plasma.json").read_bytes()
    assert run_command(["run", str(cfg)]) == 0
    assert (tmp_path / "o" / "plasma.json").read_bytes() == first
    doc = json.loads(first)
    assert doc["config"]["params"]["domain"]["vertices"][0] == [0.0, 0.0]


def test_plasma_sweep_columns(tmp_path):
    code = run_command(["plasma-sweep", "--domain", "lshape", "--h", "0.1", "--eps", "0.5,0.35,0.25",
                        "--out", str(tmp_path)])
    assert code in (0, 1)
    header, rows = io.read_table(tmp_path / "scaling.csv")
    assert "mass_slope" in header and "lambda_slope" in header
    assert len(rows) == 3


def test_config_schema():
    doc = json.loads(schema_text())
    assert doc == json.loads(json.dumps(SCHEMA))
    jsonschema.Draft7Validator.check_schema(doc)
    shipped = Path(__file__).resolve().parents[1] / "docs" / "config.schema.json"
    assert json.loads(shipped.read_text()) == doc
    with pytest.raises(InvalidSpecError):
        RunConfig.from_dict({"command": "minimal", "params": {"theta0": 4.0, "radii": [1]}})
    with pytest.raises(InvalidSpecError):
        RunConfig("family", {"theta0": 1.0, "mu_minus": 1.0}, str(Path.cwd())).resolved()
    r = RunConfig("oracle", {"kind": "disk"}).resolved()
    assert r.params["R"] == 1.0 and r.params["n_grid"] == 201


def test_resolve_domain(tmp_path):
    p = tmp_path / "poly.json"
    p.write_text(json.dumps(resolve_domain("lshape").to_json()))
    assert resolve_domain(str(p), 0.2).mesh_size == 0.2
    with pytest.raises(InvalidSpecError):
        resolve_domain("nowhere.json")
