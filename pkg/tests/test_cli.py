import json

import numpy as np
import pytest

from iafc.cli import run
from iafc.config import PlannerConfig, config_from_dict, dump_config, load_config
from iafc.errors import ConfigError
from iafc.mesh_io import load_mesh
from iafc.voxel_field import read_field_dump

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

C_PLATE_TOML = """
mesh = "plate.stl"

[seeds]
entry = [-80.0, 0.0, -35.0]
middle = [0.0, 0.0, -60.0]
exit = [80.0, 0.0, -35.0]

[frame]
origin = [0.0, 0.0, 0.0]
normal = [1.0, 0.0, 0.0]

[lattice.entry]
rows = 5
cols = 5
spacing = 4.0

[lattice.exit]
rows = 5
cols = 5
spacing = 4.0

[lattice.middle]
rows = {mid_rows}
cols = 3
spacing = {mid_spacing}
"""


@pytest.fixture
def plate_dir(tmp_path):
    assert run(["phantom", "c_plate", "--thickness", "8", "--radius", "60", "--sweep", "120",
                "--out", str(tmp_path / "plate.stl")]) == 0
    (tmp_path / "c.toml").write_text(C_PLATE_TOML.format(mid_rows=3, mid_spacing=1.0))
    return tmp_path


def test_plan_arc_ok(plate_dir, capsys):
    report = plate_dir / "report.json"
    code = run(["plan", "--mode", "arc", "--config", str(plate_dir / "c.toml"), "--report", str(report),
                "--polyline", str(plate_dir / "p.ply"), "--tube", str(plate_dir / "t.stl"),
                "--candidates", str(plate_dir / "c.csv")])
    assert code == 0
    doc = json.loads(report.read_text())
    assert doc["channel"]["kind"] == "arc" and doc["csv"] >= 1
    assert "arc: csv=" in capsys.readouterr().out
    assert (plate_dir / "p.ply").read_text().startswith("ply")
    assert len(load_mesh(plate_dir / "t.stl").triangles) > 0
    rows = (plate_dir / "c.csv").read_text().splitlines()
    assert rows[0] == "entry_idx,mid_idx,exit_idx,length_mm,curvature_per_mm,csv,min_count,mean,feasible"
    assert len(rows) - 1 == doc["stage_counts"]["enumerated"]


def test_plan_straight_no_channel(plate_dir):
    report = plate_dir / "s.json"
    code = run(["plan", "--mode", "straight", "--config", str(plate_dir / "c.toml"), "--report", str(report)])
    assert code == 2
    doc = json.loads(report.read_text())
    assert doc["feasible"] is False and doc["infeasibility"]["marker"] == "no viable channel"


def test_compare_writes_both(plate_dir):
    report = plate_dir / "cmp.json"
    code = run(["compare", "--config", str(plate_dir / "c.toml"), "--report", str(report),
                "--polyline", str(plate_dir / "p.ply")])
    assert code == 0
    doc = json.loads(report.read_text())
    assert doc["verdict"] == {"arc": "feasible", "straight": "no viable channel"}
    assert (plate_dir / "p_arc.ply").exists() and not (plate_dir / "p_straight.ply").exists()


def test_zero_spacing_is_config_error(plate_dir, capsys):
    (plate_dir / "bad.toml").write_text(C_PLATE_TOML.format(mid_rows=3, mid_spacing=0.0))
    assert run(["plan", "--config", str(plate_dir / "bad.toml")]) == 1
    err = capsys.readouterr().err
    assert err.startswith("iafc: error:") and "spacing" in err and len(err.strip().splitlines()) == 1


@pytest.mark.parametrize("argv", [["plan", "--config", "/nonexistent.toml"],
                                  ["plan", "--config", "{cfg}", "--mesh", "/nonexistent.stl"],
                                  ["plan", "--config", "{cfg}", "--step", "-1"],
                                  ["inspect", "--mesh", "/nonexistent.stl"],
                                  ["phantom", "c_plate", "--sweep", "0", "--out", "{dir}/x.stl"]])
def test_errors_exit_one(plate_dir, argv):
    argv = [a.format(cfg=plate_dir / "c.toml", dir=plate_dir) for a in argv]
    assert run(argv) == 1


def test_malformed_toml(tmp_path):
    (tmp_path / "x.toml").write_text("mesh = [")
    assert run(["plan", "--config", str(tmp_path / "x.toml")]) == 1


def test_deterministic_reports_byte_identical(plate_dir):
    paths = [plate_dir / "a.json", plate_dir / "b.json"]
    for p, workers in zip(paths, ("1", "2")):
        assert run(["plan", "--config", str(plate_dir / "c.toml"), "--report", str(p), "--deterministic",
                    "--workers", workers]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert "timing" not in json.loads(paths[0].read_text())


def test_voxelize_dump(tmp_path):
    assert run(["phantom", "cuboid", "--size", "4", "3", "2", "--out", str(tmp_path / "b.stl")]) == 0
    assert run(["voxelize", "--mesh", str(tmp_path / "b.stl"), "--out", str(tmp_path / "f.bin")]) == 0
    f = read_field_dump(tmp_path / "f.bin")
    assert f.grid.dims == (6, 5, 4)
    assert (f.values >= 0).sum() == 24 and f.max_depth == 0


def test_inspect(tmp_path, capsys):
    run(["phantom", "cuboid", "--out", str(tmp_path / "b.stl"), "--ascii"])
    assert run(["inspect", "--mesh", str(tmp_path / "b.stl")]) == 0
    out = capsys.readouterr().out
    assert "triangles: 12" in out and "occupied=16000" in out and "max erosion depth: 9" in out


def test_config_roundtrip():
    doc = tomllib.loads(C_PLATE_TOML.format(mid_rows=3, mid_spacing=1.5))
    cfg = config_from_dict(doc)
    again = config_from_dict(tomllib.loads(dump_config(cfg)))
    assert again == cfg
    assert cfg.middle_lattice.spacing == 1.5 and cfg.entry_lattice.rows == 5


def test_config_rejects_bad_values():
    with pytest.raises(ConfigError):
        config_from_dict({"seeds": {"entry": [1, 2]}})
    with pytest.raises(ConfigError):
        PlannerConfig(mode="spline").validate()
    with pytest.raises(ConfigError):
        PlannerConfig(connectivity=8).validate()
    with pytest.raises(ConfigError):
        config_from_dict({"lattice": {"side": {"rows": 2}}})


def test_digest_ignores_outputs():
    a, b = PlannerConfig(), PlannerConfig(report="x.json", workers=4)
    assert a.digest() == b.digest()
    assert a.digest() != PlannerConfig(step=0.5).digest()
