"""Constant-curvature channels: three-point arcs, straight segments, sampling.

Every channel is evaluated with one formula. Starting at ``entry`` with unit
tangent ``t`` and unit vector ``m`` pointing at the circle centre, the point
at arc length s is

    entry + S(s) * t + C(s) * m,   S = sin(k s) / k,  C = 2 sin^2(k s / 2) / k

which reduces to ``entry + s * t`` when the curvature k is zero. Batch and
single-channel code share these kernels so both give bit-identical samples.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mesh_io import TriangleMesh

COINCIDENT_TOL = 1e-6  # mm
COLLINEAR_TOL = 1e-9  # triangle area / longest edge^2
ENDPOINT_TOL = 1e-9  # fraction of a sampling step


class GeometryError(ValueError):
    """Raised for coincident channel control points."""


def _dot(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _cross(a, b):
    return np.stack([
        a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
        a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
        a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
    ], axis=-1)


def _norm(a):
    return np.sqrt(_dot(a, a))


@dataclass(frozen=True, eq=False)
class Channel:
    kind: str  # "arc" or "straight"
    entry: np.ndarray
    exit: np.ndarray
    tangent: np.ndarray
    inward: np.ndarray
    curvature: float
    length: float
    mid: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    radius: float = math.inf
    normal: Optional[np.ndarray] = None
    sweep: float = 0.0

    def reversed(self) -> "Channel":
        if self.kind == "straight":
            return straight_through_points(self.exit, self.entry)
        return arc_through_points(self.exit, self.mid, self.entry)

    def to_dict(self) -> dict:
        def vec(v):
            return None if v is None else [float(x) for x in v]
        return {
            "kind": self.kind,
            "entry": vec(self.entry),
            "exit": vec(self.exit),
            "mid": vec(self.mid),
            "center": vec(self.center),
            "radius": None if math.isinf(self.radius) else float(self.radius),
            "normal": vec(self.normal),
            "sweep_rad": float(self.sweep),
            "length_mm": float(self.length),
            "curvature_per_mm": float(self.curvature),
            "tangent": vec(self.tangent),
            "inward": vec(self.inward),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Channel":
        def arr(v):
            return None if v is None else np.array(v, dtype=np.float64)
        return cls(
            kind=d["kind"], entry=arr(d["entry"]), exit=arr(d["exit"]),
            tangent=arr(d["tangent"]), inward=arr(d["inward"]),
            curvature=float(d["curvature_per_mm"]), length=float(d["length_mm"]),
            mid=arr(d.get("mid")), center=arr(d.get("center")),
            radius=math.inf if d.get("radius") is None else float(d["radius"]),
            normal=arr(d.get("normal")), sweep=float(d.get("sweep_rad", 0.0)),
        )


def circle_frames(a, b, c):
    """Vectorised three-point circle construction.

    Inputs broadcast to (..., 3). Returns a dict of arrays: center, normal,
    radius, sweep, length, curvature, tangent, inward, area_ratio, min_dist,
    collinear. Collinear rows carry straight-line values (zero curvature,
    tangent along a->c); coincident rows are flagged through ``min_dist``.
    """
    a, b, c = np.broadcast_arrays(*(np.asarray(p, dtype=np.float64) for p in (a, b, c)))
    ab, bc, ca = b - a, c - b, a - c
    edges = np.stack([_dot(bc, bc), _dot(ca, ca), _dot(ab, ab)], axis=-1)  # opposite a, b, c
    longest = edges.max(axis=-1)
    min_dist = np.sqrt(edges.min(axis=-1))
    # build from the vertex facing the longest edge: its two edges are far from
    # parallel, so the cross product below does not cancel. Cyclic rotation
    # keeps the orientation of u x v.
    pick = np.argmax(edges, axis=-1)[..., None]
    base = np.where(pick == 0, a, np.where(pick == 1, b, c))
    u = np.where(pick == 0, ab, np.where(pick == 1, bc, ca))
    v = -np.where(pick == 0, ca, np.where(pick == 1, ab, bc))
    w = _cross(u, v)
    uu = _dot(u, u)
    vv = _dot(v, v)
    ww = _dot(w, w)
    wn = np.sqrt(ww)
    with np.errstate(divide="ignore", invalid="ignore"):
        area_ratio = np.where(longest > 0, 0.5 * wn / longest, 0.0)
    collinear = area_ratio < COLLINEAR_TOL
    safe_ww = np.where(collinear, 1.0, ww)
    safe_wn = np.where(collinear, 1.0, wn)

    offset = (uu[..., None] * _cross(v, w) + vv[..., None] * _cross(w, u)) / (2.0 * safe_ww[..., None])
    center = base + offset
    normal = w / safe_wn[..., None]
    radius = _norm(a - center)
    safe_r = np.where(collinear, 1.0, radius)
    ea = (a - center) / safe_r[..., None]
    ec = (c - center) / safe_r[..., None]
    sweep = np.arctan2(_dot(_cross(ea, ec), normal), _dot(ea, ec))
    sweep = np.where(sweep <= 0.0, sweep + 2.0 * np.pi, sweep)
    arc_tangent = _cross(normal, ea)
    arc_length = radius * sweep

    chord = np.sqrt(edges[..., 1])
    safe_chord = np.where(chord > 0, chord, 1.0)
    line_tangent = -ca / safe_chord[..., None]

    col = collinear[..., None]
    return {
        "center": center,
        "normal": normal,
        "radius": np.where(collinear, np.inf, radius),
        "sweep": np.where(collinear, 0.0, sweep),
        "length": np.where(collinear, chord, arc_length),
        "curvature": np.where(collinear, 0.0, 1.0 / safe_r),
        "tangent": np.where(col, line_tangent, arc_tangent),
        "inward": np.where(col, 0.0, -ea),
        "area_ratio": area_ratio,
        "min_dist": min_dist,
        "collinear": collinear,
    }


def line_frames(a, c):
    """Vectorised straight segments: tangent, length, min_dist."""
    a, c = np.broadcast_arrays(np.asarray(a, dtype=np.float64), np.asarray(c, dtype=np.float64))
    v = c - a
    chord = _norm(v)
    safe = np.where(chord > 0, chord, 1.0)
    return {"tangent": v / safe[..., None], "length": chord, "min_dist": chord}


def arc_through_points(entry, mid, exit) -> Channel:
    """Circular arc from ``entry`` to ``exit`` passing through ``mid``.

    Nearly collinear triples (area ratio below COLLINEAR_TOL) give the
    straight channel from entry to exit instead of a huge-radius arc.
    """
    a, b, c = (np.asarray(p, dtype=np.float64).reshape(3) for p in (entry, mid, exit))
    f = circle_frames(a[None], b[None], c[None])
    if f["min_dist"][0] <= COINCIDENT_TOL:
        raise GeometryError("arc control points are coincident")
    if f["collinear"][0]:
        return straight_through_points(a, c)
    return Channel(
        kind="arc", entry=a, exit=c, mid=b,
        tangent=f["tangent"][0], inward=f["inward"][0],
        curvature=float(f["curvature"][0]), length=float(f["length"][0]),
        center=f["center"][0], radius=float(f["radius"][0]),
        normal=f["normal"][0], sweep=float(f["sweep"][0]),
    )


def straight_through_points(entry, exit) -> Channel:
    """Zero-curvature channel from ``entry`` to ``exit``."""
    a, c = (np.asarray(p, dtype=np.float64).reshape(3) for p in (entry, exit))
    f = line_frames(a[None], c[None])
    if f["length"][0] <= COINCIDENT_TOL:
        raise GeometryError("straight channel endpoints are coincident")
    return Channel(kind="straight", entry=a, exit=c, tangent=f["tangent"][0],
                   inward=np.zeros(3), curvature=0.0, length=float(f["length"][0]))


def sample_counts(lengths, step: float) -> np.ndarray:
    """Samples per channel: 0, step, 2*step, ... plus the exact endpoint."""
    lengths = np.asarray(lengths, dtype=np.float64)
    n = np.floor(lengths / step)
    resid = lengths - n * step
    extra = resid > ENDPOINT_TOL * step
    return (n + 1 + extra).astype(np.int64)


def sample_arclengths(lengths, step: float):
    """(B, S) arc-length grid and validity mask; column count-1 is the endpoint."""
    lengths = np.asarray(lengths, dtype=np.float64)
    counts = sample_counts(lengths, step)
    width = int(counts.max()) if counts.size else 0
    s = np.arange(width, dtype=np.float64)[None, :] * step
    s = np.broadcast_to(s, (len(lengths), width)).copy()
    rows = np.arange(len(lengths))
    s[rows, counts - 1] = lengths
    valid = np.arange(width)[None, :] < counts[:, None]
    return s, valid, counts


def curve_offsets(curvature, s):
    """Distances along the entry tangent and toward the centre at arc lengths ``s`` (B, S)."""
    k = np.asarray(curvature, dtype=np.float64)[:, None]
    bent = k != 0.0
    if not bent.any():
        return s, None
    safe_k = np.where(bent, k, 1.0)
    along = np.sin(safe_k * s)
    along /= safe_k
    half = np.sin(0.5 * safe_k * s)
    across = half * half
    across *= 2.0
    across /= safe_k
    if not bent.all():
        flat = ~bent[:, 0]
        along[flat] = s[flat]
        across[flat] = 0.0
    return along, across


def curve_coordinate(entry, tangent, inward, along, across, axis: int):
    """One Cartesian coordinate of the curve points, (B, S)."""
    c = along * tangent[:, axis, None]
    c += entry[:, axis, None]
    if across is not None:
        c += across * inward[:, axis, None]
    return c


def curve_points(entry, tangent, inward, curvature, s):
    """Evaluate constant-curvature curves; entry/tangent/inward (B, 3), curvature (B,), s (B, S)."""
    along, across = curve_offsets(curvature, s)
    return np.stack([curve_coordinate(entry, tangent, inward, along, across, a) for a in range(3)],
                    axis=-1)


def sample_channel(channel: Channel, step: float = 1.0) -> np.ndarray:
    """Points at equal arc-length intervals, ending exactly on ``channel.exit``."""
    if not step > 0:
        raise ValueError(f"sampling step must be positive, got {step}")
    s, _, counts = sample_arclengths([channel.length], step)
    pts = curve_points(channel.entry[None], channel.tangent[None], channel.inward[None],
                       [channel.curvature], s)[0]
    pts[counts[0] - 1] = channel.exit
    return pts


def write_polyline_ply(points, path) -> None:
    """ASCII PLY with one vertex per sample and an edge between neighbours."""
    pts = np.asarray(points, dtype=np.float64)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="ascii") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pts)}\nproperty double x\nproperty double y\nproperty double z\n")
        fh.write(f"element edge {max(len(pts) - 1, 0)}\nproperty int vertex1\nproperty int vertex2\n")
        fh.write("end_header\n")
        for p in pts:
            fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r}\n")
        for i in range(len(pts) - 1):
            fh.write(f"{i} {i + 1}\n")
    os.replace(tmp, path)


def tube_mesh(points, radius: float, sides: int = 16) -> TriangleMesh:
    """Closed tube of the given radius around a polyline (rotation-minimising frames)."""
    pts = np.asarray(points, dtype=np.float64)
    if radius <= 0 or sides < 3 or len(pts) < 2:
        raise ValueError("tube needs radius > 0, sides >= 3 and at least two points")
    tang = np.gradient(pts, axis=0)
    tang /= np.linalg.norm(tang, axis=1, keepdims=True)
    ref = np.eye(3)[np.argmin(np.abs(tang[0]))]
    n = np.cross(tang[0], ref)
    n /= np.linalg.norm(n)
    rings = []
    theta = np.linspace(0, 2 * np.pi, sides, endpoint=False)
    for i, t in enumerate(tang):
        if i:
            n = n - (n @ t) * t
            n /= np.linalg.norm(n)
        b = np.cross(t, n)
        rings.append(pts[i] + radius * (np.cos(theta)[:, None] * n + np.sin(theta)[:, None] * b))
    verts = np.vstack(rings + [pts[:1], pts[-1:]])
    tris = []
    for i in range(len(pts) - 1):
        for j in range(sides):
            a, b = i * sides + j, i * sides + (j + 1) % sides
            c, d = a + sides, b + sides
            tris += [(a, b, d), (a, d, c)]
    start, end = len(verts) - 2, len(verts) - 1
    last = (len(pts) - 1) * sides
    for j in range(sides):
        tris.append((start, (j + 1) % sides, j))
        tris.append((end, last + j, last + (j + 1) % sides))
    return TriangleMesh(verts, np.array(tris))
