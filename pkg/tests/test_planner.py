import json

import numpy as np
import pytest

from conftest import C_PLATE_SEEDS
from iafc.arc_geometry import Channel, sample_channel
from iafc.config import LatticeConfig, PlannerConfig
from iafc.errors import NoViableChannel
from iafc.planner import (COMPARISON_SCHEMA, REPORT_SCHEMA, compare, plan, prepare, rescore_report,
                          run_mode, write_json)
from iafc.scoring import score_channel
from iafc.voxel_field import build_distance_field, voxelize


def c_plate_config(**kw):
    cfg = PlannerConfig(entry_seed=C_PLATE_SEEDS["entry"], middle_seed=C_PLATE_SEEDS["middle"],
                        exit_seed=C_PLATE_SEEDS["exit"], **kw)
    return cfg.validate()


def cuboid_config(**kw):
    cfg = PlannerConfig(entry_seed=(-10, 10, 10), middle_seed=(20, 10, 10), exit_seed=(50, 10, 10),
                        frame_origin=(20, 10, 10), entry_lattice=LatticeConfig(5, 5, 2.0),
                        exit_lattice=LatticeConfig(5, 5, 2.0), middle_lattice=LatticeConfig(3, 3, 1.0), **kw)
    return cfg.validate()


@pytest.fixture(scope="module")
def c_plate_run(c_plate_mesh):
    cfg = c_plate_config()
    prep = prepare(c_plate_mesh, cfg.seed_spec(), cfg)
    return cfg, prep, compare(c_plate_mesh, cfg.seed_spec(), cfg, prepared=prep)


def test_c_plate_arc_feasible_straight_not(c_plate_run):
    cfg, prep, cmp = c_plate_run
    assert cmp.arc.feasible and cmp.arc.csv >= 1
    assert cmp.arc.channel.kind == "arc"
    assert not cmp.straight.feasible
    d = cmp.straight.to_dict()
    assert d["infeasibility"]["marker"] == "no viable channel"
    assert d["channel"] is None and d["csv"] is None
    assert cmp.csv_delta is None
    doc = cmp.to_dict()
    assert doc["schema"] == COMPARISON_SCHEMA
    assert doc["verdict"] == {"arc": "feasible", "straight": "no viable channel"}


def test_report_roundtrip(c_plate_run, tmp_path):
    cfg, prep, cmp = c_plate_run
    path = tmp_path / "r.json"
    write_json(cmp.arc.to_dict(), path)
    doc = json.loads(path.read_text())
    assert doc["schema"] == REPORT_SCHEMA
    score = rescore_report(doc, prep.field)
    assert score.vdva.tolist() == doc["vdva"]
    assert score.csv == doc["csv"] and score.min_count == doc["min_count"]
    ch = Channel.from_dict(doc["channel"])
    assert ch.length == doc["length_mm"] and ch.curvature == doc["curvature_per_mm"]
    assert sample_channel(ch, cfg.step).tolist() == doc["channel"]["polyline"]
    assert doc["mean_fraction"] == [score.mean.numerator, score.mean.denominator]
    assert doc["provenance"]["mesh_sha256"] == prep.mesh_sha256
    with pytest.raises(NoViableChannel):
        rescore_report(cmp.straight.to_dict(), prep.field)


def test_field_reuse_matches_recompute(c_plate_mesh, c_plate_run):
    cfg, prep, cmp = c_plate_run
    alone = plan(c_plate_mesh, cfg.seed_spec(), cfg, "arc")
    assert alone.candidate.index == cmp.arc.candidate.index
    assert alone.score == cmp.arc.score
    assert alone.to_dict(deterministic=True) == cmp.arc.to_dict(deterministic=True)


def test_stage_counts(c_plate_run):
    counts = c_plate_run[2].arc.stage_counts
    sizes = c_plate_run[1].lattices.sizes
    assert counts["enumerated"] + counts["skipped"] == sizes[0] * sizes[1] * sizes[2]
    assert (counts["enumerated"] >= counts["feasible"] >= counts["viable"] >= counts["stage1"]
            >= counts["stage2"] >= counts["stage3"] >= counts["stage4"] == 1)


def test_timing_is_optional(c_plate_run):
    rep = c_plate_run[2].arc
    assert "timing" in rep.to_dict() and "timing" not in rep.to_dict(deterministic=True)
    assert set(rep.timing) >= {"voxelize_s", "erode_s", "enumerate_score_select_s"}


@pytest.mark.parametrize("kw,csv", [({"min_csv": 0}, 0), ({"surface_inset": 1.5}, 1)])
def test_cuboid_symmetric(cuboid_mesh, kw, csv):
    cfg = cuboid_config(**kw)
    cmp = compare(cuboid_mesh, cfg.seed_spec(), cfg)
    assert cmp.arc.feasible and cmp.straight.feasible
    assert cmp.arc.csv == cmp.straight.csv == csv
    assert cmp.csv_delta == 0


def test_straight_winner_rescored_as_degenerate_arc(cuboid_mesh):
    from iafc.arc_geometry import arc_through_points

    cfg = cuboid_config(min_csv=0)
    rep = plan(cuboid_mesh, cfg.seed_spec(), cfg, "straight")
    ch = rep.channel
    as_arc = arc_through_points(ch.entry, 0.5 * (ch.entry + ch.exit), ch.exit)
    assert as_arc.curvature == 0.0
    field = build_distance_field(voxelize(cuboid_mesh, cfg.pitch))
    assert score_channel(as_arc, field, cfg.step) == rep.score


def test_reports_are_deterministic(cuboid_mesh):
    cfg = cuboid_config(min_csv=0)
    a = plan(cuboid_mesh, cfg.seed_spec(), cfg).to_dict(deterministic=True)
    b = plan(cuboid_mesh, cfg.seed_spec(), cfg).to_dict(deterministic=True)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
