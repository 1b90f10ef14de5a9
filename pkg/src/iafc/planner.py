"""End-to-end planning in arc or straight mode, and arc-vs-straight comparison."""
from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .arc_geometry import Channel, sample_channel
from .config import PlannerConfig
from .errors import NoViableChannel
from .mesh_io import TriangleMesh
from .scoring import ChannelScore, score_channel
from .seeding import SeedLattices, SeedSpec, build_seed_lattices
from .selection import CandidateRef, SearchOptions, search
from .voxel_field import VoxelDistanceField, build_distance_field, voxelize

REPORT_SCHEMA = "iafc.plan_report/1"
COMPARISON_SCHEMA = "iafc.comparison_report/1"


def mesh_digest(mesh: TriangleMesh) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(mesh.vertices, dtype="<f8").tobytes())
    h.update(np.ascontiguousarray(mesh.triangles, dtype="<i8").tobytes())
    return h.hexdigest()


@dataclass
class PlanReport:
    mode: str
    candidate: Optional[CandidateRef]
    infeasibility: Optional[str]
    stage_counts: dict
    seed_counts: dict
    settings: dict
    provenance: dict
    timing: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.candidate is not None

    @property
    def channel(self) -> Optional[Channel]:
        return None if self.candidate is None else self.candidate.channel

    @property
    def score(self) -> Optional[ChannelScore]:
        return None if self.candidate is None else self.candidate.score

    @property
    def csv(self) -> Optional[int]:
        return None if self.candidate is None else self.candidate.score.csv

    def to_dict(self, deterministic: bool = False) -> dict:
        c = self.candidate
        d = {"schema": REPORT_SCHEMA, "mode": self.mode, "feasible": self.feasible,
             "infeasibility": None if self.infeasibility is None else
             {"marker": "no viable channel", "detail": self.infeasibility}}
        if c is None:
            d.update(channel=None, length_mm=None, curvature_per_mm=None, csv=None, vdva=None,
                     min_count=None, mean=None, mean_fraction=None)
        else:
            ch = c.channel.to_dict()
            ch["polyline"] = sample_channel(c.channel, self.settings["step"]).tolist()
            s = c.score.to_dict()
            d.update(channel=ch, length_mm=c.channel.length, curvature_per_mm=c.channel.curvature,
                     csv=s["csv"], vdva=s["vdva"], min_count=s["min_count"], mean=s["mean"],
                     mean_fraction=s["mean_fraction"])
        prov = dict(self.provenance)
        if c is not None:
            prov.update(entry_index=c.entry_index, middle_index=c.middle_index, exit_index=c.exit_index)
        d.update(provenance=prov, stage_counts=self.stage_counts, seed_counts=self.seed_counts,
                 settings=self.settings)
        if not deterministic:
            d["timing"] = self.timing
        return d


@dataclass
class ComparisonReport:
    arc: PlanReport
    straight: PlanReport

    @property
    def csv_delta(self) -> Optional[int]:
        if self.arc.feasible and self.straight.feasible:
            return self.arc.csv - self.straight.csv
        return None

    def to_dict(self, deterministic: bool = False) -> dict:
        return {
            "schema": COMPARISON_SCHEMA,
            "arc": self.arc.to_dict(deterministic),
            "straight": self.straight.to_dict(deterministic),
            "csv_delta": self.csv_delta,
            "verdict": {"arc": "feasible" if self.arc.feasible else "no viable channel",
                        "straight": "feasible" if self.straight.feasible else "no viable channel"},
        }


@dataclass
class Prepared:
    """Distance field and seed sets shared by every mode of one run."""

    field: VoxelDistanceField
    lattices: SeedLattices
    timing: dict
    mesh_sha256: str


def prepare(mesh: TriangleMesh, seed_spec: SeedSpec, config: PlannerConfig) -> Prepared:
    t0 = time.perf_counter()
    grid = voxelize(mesh, config.pitch)
    t1 = time.perf_counter()
    fld = build_distance_field(grid, config.connectivity)
    t2 = time.perf_counter()
    lattices = build_seed_lattices(mesh, grid, seed_spec, config.surface_inset)
    t3 = time.perf_counter()
    timing = {"voxelize_s": t1 - t0, "erode_s": t2 - t1, "seeding_s": t3 - t2}
    return Prepared(fld, lattices, timing, mesh_digest(mesh))


def run_mode(prep: Prepared, config: PlannerConfig, mode: str, dump: bool = False):
    opts = SearchOptions(step=config.step, min_csv=config.min_csv, workers=config.workers,
                         min_radius=config.min_radius, max_radius=config.max_radius)
    t0 = time.perf_counter()
    selection, table = search(prep.lattices, prep.field, mode, opts, dump=dump)
    elapsed = time.perf_counter() - t0
    infeasible = None
    if selection.best is None:
        c = selection.stage_counts
        infeasible = (f"{c['enumerated']} candidates, {c['feasible']} stay inside the bone, "
                      f"none with csv >= {config.min_csv}")
    sizes = prep.lattices.sizes
    report = PlanReport(
        mode=mode, candidate=selection.best, infeasibility=infeasible,
        stage_counts=selection.stage_counts,
        seed_counts={"entry": sizes[0], "middle": sizes[1] if mode == "arc" else 0, "exit": sizes[2]},
        settings={"pitch": config.pitch, "step": config.step, "connectivity": config.connectivity,
                  "min_csv": config.min_csv},
        provenance={"mesh_sha256": prep.mesh_sha256, "config_sha256": config.digest()},
        timing=dict(prep.timing, enumerate_score_select_s=elapsed),
    )
    return report, table


def plan(mesh: TriangleMesh, seed_spec: SeedSpec, config: PlannerConfig, mode: Optional[str] = None,
         prepared: Optional[Prepared] = None) -> PlanReport:
    """Voxelize, erode, seed, enumerate, score and select for one mode.

    Finding no viable channel is a normal outcome: the report then carries an
    infeasibility marker instead of a channel.
    """
    mode = mode or config.mode
    prep = prepared or prepare(mesh, seed_spec, config)
    return run_mode(prep, config, mode)[0]


def compare(mesh: TriangleMesh, seed_spec: SeedSpec, config: PlannerConfig,
            prepared: Optional[Prepared] = None) -> ComparisonReport:
    prep = prepared or prepare(mesh, seed_spec, config)
    return ComparisonReport(plan(mesh, seed_spec, config, "arc", prep),
                            plan(mesh, seed_spec, config, "straight", prep))


def rescore_report(report: dict, field: VoxelDistanceField) -> ChannelScore:
    """Rebuild the channel from a serialized report and score it again."""
    if not report["feasible"]:
        raise NoViableChannel("report carries no channel")
    ch = Channel.from_dict(report["channel"])
    return score_channel(ch, field, report["settings"]["step"])


def write_json(obj: dict, path) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
