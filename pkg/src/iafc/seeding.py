"""Candidate point sets for channel enumeration.

Entry and exit points come from square lattices placed beside the bone,
parallel to the sagittal plane, and projected along the sagittal normal onto
the bone surface. The middle lattice sits inside the bone and is only pruned.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PlanningError
from .mesh_io import AnatomicalFrame, TriangleMesh, ray_mesh_intersections
from .voxel_field import VoxelGrid

WORLD_VERTICAL = np.array([0.0, 0.0, 1.0])
WORLD_ANTERIOR = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class LatticeShape:
    rows: int = 10
    cols: int = 10
    spacing: float = 2.0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"lattice needs rows, cols >= 1, got {self.rows}x{self.cols}")
        if not self.spacing > 0:
            raise ValueError(f"lattice spacing must be positive, got {self.spacing}")


@dataclass(frozen=True, eq=False)
class SeedSpec:
    entry_seed: np.ndarray
    middle_seed: np.ndarray
    exit_seed: np.ndarray
    frame: AnatomicalFrame
    entry_lattice: LatticeShape = LatticeShape()
    middle_lattice: LatticeShape = LatticeShape(5, 5, 1.0)
    exit_lattice: LatticeShape = LatticeShape()

    def __post_init__(self):
        for name in ("entry_seed", "middle_seed", "exit_seed"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=np.float64).reshape(3))
        d_in = self.frame.signed_distance(self.entry_seed)
        d_out = self.frame.signed_distance(self.exit_seed)
        if not d_in * d_out < 0:
            raise ValueError("entry and exit seeds must lie on opposite sides of the sagittal plane")


@dataclass(frozen=True, eq=False)
class SeedLattices:
    """Surviving points per set with their (row, col) lattice provenance."""

    entry_points: np.ndarray
    middle_points: np.ndarray
    exit_points: np.ndarray
    entry_ids: np.ndarray
    middle_ids: np.ndarray
    exit_ids: np.ndarray

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.entry_points), len(self.middle_points), len(self.exit_points)


def lattice_axes(frame: AnatomicalFrame) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal in-plane axes: world vertical (or anterior) orthogonalised against the normal."""
    n = frame.sagittal_normal
    ref = WORLD_VERTICAL if abs(WORLD_VERTICAL @ n) < 0.9 else WORLD_ANTERIOR
    u = ref - (ref @ n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v


def lattice_ids(rows: int, cols: int) -> np.ndarray:
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    return np.stack([r.ravel(), c.ravel()], axis=1)


def make_lattice(center, frame: AnatomicalFrame, rows: int, cols: int, spacing: float) -> np.ndarray:
    """rows x cols points centred on ``center`` in the plane parallel to the sagittal plane."""
    center = np.asarray(center, dtype=np.float64)
    u, v = lattice_axes(frame)
    ids = lattice_ids(rows, cols)
    a = (ids[:, 0] - (rows - 1) / 2.0) * spacing
    b = (ids[:, 1] - (cols - 1) / 2.0) * spacing
    return center + a[:, None] * u + b[:, None] * v


def project_to_surface(points, frame: AnatomicalFrame, mesh: TriangleMesh, toward: int):
    """First surface hit of each point moved along ``toward`` * sagittal normal.

    Returns (hit points, indices of the input points that hit).
    """
    direction = float(np.sign(toward)) * frame.sagittal_normal
    hits, kept = [], []
    for i, p in enumerate(np.asarray(points, dtype=np.float64)):
        found = ray_mesh_intersections(mesh, p, direction)
        if found:
            hits.append(found[0][1])
            kept.append(i)
    return np.array(hits, dtype=np.float64).reshape(-1, 3), np.array(kept, dtype=np.int64)


def prune_outside(points, grid: VoxelGrid, inset: float = 0.0, direction=None, label: str = "points"):
    """Keep points whose containing voxel is occupied.

    Points are first moved ``inset`` mm along ``direction`` (the projection
    direction for surface points). Returns (kept points, their input indices).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if inset and direction is not None:
        pts = pts + inset * np.asarray(direction, dtype=np.float64)
    keep = np.flatnonzero(grid.contains_occupied(pts)) if len(pts) else np.zeros(0, dtype=np.int64)
    if len(keep) == 0:
        raise PlanningError(f"no viable seed points on {label}")
    return pts[keep], keep


def build_seed_lattices(mesh: TriangleMesh, grid: VoxelGrid, spec: SeedSpec,
                        inset: float | None = None) -> SeedLattices:
    """Entry/exit lattices projected onto the surface and pushed ``inset`` mm
    inwards (default one voxel pitch); middle lattice pruned in place."""
    frame = spec.frame
    inset = grid.pitch if inset is None else inset
    out = {}
    for name, seed, shape in (("entry", spec.entry_seed, spec.entry_lattice),
                              ("exit", spec.exit_seed, spec.exit_lattice)):
        side = float(np.sign(frame.signed_distance(seed)))
        lattice = make_lattice(seed, frame, shape.rows, shape.cols, shape.spacing)
        ids = lattice_ids(shape.rows, shape.cols)
        hits, hit_idx = project_to_surface(lattice, frame, mesh, toward=-side)
        if len(hits) == 0:
            raise PlanningError(f"no viable seed points on {name} (no surface hit)")
        pts, keep = prune_outside(hits, grid, inset, -side * frame.sagittal_normal, label=name)
        ids = ids[hit_idx[keep]]
        same_side = np.sign(frame.signed_distance(pts)) == side
        if not same_side.any():
            raise PlanningError(f"no viable seed points on {name} (all crossed the sagittal plane)")
        out[name] = (pts[same_side], ids[same_side])
    m = spec.middle_lattice
    lattice = make_lattice(spec.middle_seed, frame, m.rows, m.cols, m.spacing)
    mid_pts, keep = prune_outside(lattice, grid, label="middle")
    return SeedLattices(
        entry_points=out["entry"][0], middle_points=mid_pts, exit_points=out["exit"][0],
        entry_ids=out["entry"][1], middle_ids=lattice_ids(m.rows, m.cols)[keep], exit_ids=out["exit"][1],
    )
