"""Planner configuration read from a TOML file.

Example::

    mesh = "pelvis.stl"          # millimetres; relative to this file
    mode = "compare"             # arc | straight | compare

    [seeds]
    entry = [-80.0, 0.0, -35.0]
    middle = [0.0, 0.0, -60.0]
    exit = [80.0, 0.0, -35.0]

    [frame]
    origin = [0.0, 0.0, 0.0]
    normal = [1.0, 0.0, 0.0]     # left-right axis

    [lattice.entry]
    rows = 10
    cols = 10
    spacing = 2.0

    [voxel]
    pitch = 1.0
    connectivity = 6

    [scoring]
    step = 1.0
    min_csv = 1

    [output]
    report = "report.json"
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .mesh_io import AnatomicalFrame
from .seeding import LatticeShape, SeedSpec

MODES = ("arc", "straight", "compare")


@dataclass
class LatticeConfig:
    rows: int
    cols: int
    spacing: float


@dataclass
class PlannerConfig:
    mesh: Optional[str] = None
    entry_seed: tuple = (0.0, 0.0, 0.0)
    middle_seed: tuple = (0.0, 0.0, 0.0)
    exit_seed: tuple = (0.0, 0.0, 0.0)
    frame_origin: tuple = (0.0, 0.0, 0.0)
    frame_normal: tuple = (1.0, 0.0, 0.0)
    entry_lattice: LatticeConfig = field(default_factory=lambda: LatticeConfig(10, 10, 2.0))
    middle_lattice: LatticeConfig = field(default_factory=lambda: LatticeConfig(5, 5, 1.0))
    exit_lattice: LatticeConfig = field(default_factory=lambda: LatticeConfig(10, 10, 2.0))
    pitch: float = 1.0
    step: float = 1.0
    connectivity: int = 6
    min_csv: int = 1
    surface_inset: Optional[float] = None  # mm; None means one voxel pitch
    min_radius: Optional[float] = None
    max_radius: Optional[float] = None
    mode: str = "arc"
    workers: int = 1
    report: Optional[str] = None
    polyline: Optional[str] = None
    tube: Optional[str] = None
    tube_radius: float = 3.0
    candidates: Optional[str] = None
    field_dump: Optional[str] = None

    def validate(self) -> "PlannerConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        for name in ("pitch", "step", "tube_radius"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("entry_lattice", "middle_lattice", "exit_lattice"):
            lat = getattr(self, name)
            if lat.rows < 1 or lat.cols < 1:
                raise ConfigError(f"{name}: rows and cols must be >= 1")
            if not lat.spacing > 0:
                raise ConfigError(f"{name}: spacing must be positive, got {lat.spacing}")
        if self.connectivity not in (6, 26):
            raise ConfigError(f"connectivity must be 6 or 26, got {self.connectivity}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.surface_inset is not None and self.surface_inset < 0:
            raise ConfigError("surface_inset must be >= 0")
        for name in ("min_radius", "max_radius"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigError(f"{name} must be positive when set")
        for name in ("entry_seed", "middle_seed", "exit_seed", "frame_origin", "frame_normal"):
            v = getattr(self, name)
            if len(v) != 3 or not all(np.isfinite(v)):
                raise ConfigError(f"{name} must be three finite numbers")
        if np.linalg.norm(self.frame_normal) == 0:
            raise ConfigError("frame normal must be non-zero")
        return self

    def seed_spec(self) -> SeedSpec:
        frame = AnatomicalFrame(self.frame_origin, self.frame_normal)
        try:
            return SeedSpec(
                self.entry_seed, self.middle_seed, self.exit_seed, frame,
                LatticeShape(**dataclasses.asdict(self.entry_lattice)),
                LatticeShape(**dataclasses.asdict(self.middle_lattice)),
                LatticeShape(**dataclasses.asdict(self.exit_lattice)),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def planning_dict(self) -> dict:
        """Parameters that influence results (no output paths, no worker count)."""
        d = dataclasses.asdict(self)
        for key in ("mesh", "mode", "workers", "report", "polyline", "tube", "tube_radius",
                    "candidates", "field_dump"):
            d.pop(key)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.planning_dict(), sort_keys=True, default=list)
        return hashlib.sha256(blob.encode()).hexdigest()


def _vec(value, name):
    try:
        v = tuple(float(x) for x in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a list of three numbers") from None
    if len(v) != 3:
        raise ConfigError(f"{name} must have three components, got {len(v)}")
    return v


def config_from_dict(doc: dict, base: Optional[Path] = None) -> PlannerConfig:
    cfg = PlannerConfig()
    try:
        if "mesh" in doc:
            mesh = Path(doc["mesh"])
            if base is not None and not mesh.is_absolute():
                mesh = base / mesh
            cfg.mesh = str(mesh)
        cfg.mode = doc.get("mode", cfg.mode)
        seeds = doc.get("seeds", {})
        for key in ("entry", "middle", "exit"):
            if key in seeds:
                setattr(cfg, f"{key}_seed", _vec(seeds[key], f"seeds.{key}"))
        frame = doc.get("frame", {})
        if "origin" in frame:
            cfg.frame_origin = _vec(frame["origin"], "frame.origin")
        if "normal" in frame:
            cfg.frame_normal = _vec(frame["normal"], "frame.normal")
        for key, lat in doc.get("lattice", {}).items():
            if key not in ("entry", "middle", "exit"):
                raise ConfigError(f"unknown lattice section [lattice.{key}]")
            cur = getattr(cfg, f"{key}_lattice")
            setattr(cfg, f"{key}_lattice", LatticeConfig(
                int(lat.get("rows", cur.rows)), int(lat.get("cols", cur.cols)),
                float(lat.get("spacing", cur.spacing))))
        vox = doc.get("voxel", {})
        cfg.pitch = float(vox.get("pitch", cfg.pitch))
        cfg.connectivity = int(vox.get("connectivity", cfg.connectivity))
        sc = doc.get("scoring", {})
        cfg.step = float(sc.get("step", cfg.step))
        cfg.min_csv = int(sc.get("min_csv", cfg.min_csv))
        se = doc.get("search", {})
        cfg.workers = int(se.get("workers", cfg.workers))
        for key in ("surface_inset", "min_radius", "max_radius"):
            if key in se:
                setattr(cfg, key, float(se[key]))
        out = doc.get("output", {})
        for key in ("report", "polyline", "tube", "candidates", "field_dump"):
            if key in out:
                p = Path(out[key])
                if base is not None and not p.is_absolute():
                    p = base / p
                setattr(cfg, key, str(p))
        if "tube_radius" in out:
            cfg.tube_radius = float(out["tube_radius"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config value: {exc}") from None
    return cfg


def load_config(path) -> PlannerConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc, path.parent).validate()


def dump_config(cfg: PlannerConfig) -> str:
    """Render a config as TOML (round-trips through :func:`config_from_dict`)."""
    def vec(v):
        return "[" + ", ".join(repr(float(x)) for x in v) + "]"

    lines = []
    if cfg.mesh:
        lines.append(f"mesh = {json.dumps(cfg.mesh)}")
    lines.append(f"mode = {json.dumps(cfg.mode)}")
    lines += ["", "[seeds]", f"entry = {vec(cfg.entry_seed)}", f"middle = {vec(cfg.middle_seed)}",
              f"exit = {vec(cfg.exit_seed)}", "", "[frame]", f"origin = {vec(cfg.frame_origin)}",
              f"normal = {vec(cfg.frame_normal)}"]
    for key in ("entry", "middle", "exit"):
        lat = getattr(cfg, f"{key}_lattice")
        lines += ["", f"[lattice.{key}]", f"rows = {lat.rows}", f"cols = {lat.cols}",
                  f"spacing = {float(lat.spacing)!r}"]
    lines += ["", "[voxel]", f"pitch = {cfg.pitch!r}", f"connectivity = {cfg.connectivity}",
              "", "[scoring]", f"step = {cfg.step!r}", f"min_csv = {cfg.min_csv}",
              "", "[search]", f"workers = {cfg.workers}"]
    for key in ("surface_inset", "min_radius", "max_radius"):
        if getattr(cfg, key) is not None:
            lines.append(f"{key} = {float(getattr(cfg, key))!r}")
    outs = [(k, getattr(cfg, k)) for k in ("report", "polyline", "tube", "candidates", "field_dump")]
    lines += ["", "[output]", f"tube_radius = {cfg.tube_radius!r}"]
    lines += [f"{k} = {json.dumps(v)}" for k, v in outs if v]
    return "\n".join(lines) + "\n"
