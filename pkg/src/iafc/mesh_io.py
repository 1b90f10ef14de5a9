"""Triangle mesh loading, validation and ray queries.

All coordinates are millimetres. STL carries no unit metadata, so this is a
convention callers must respect when exporting bone models.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

AREA_TOL = 1e-9  # mm^2
BOUNDARY_TOL = 1e-9
PERTURB_EPS = 1e-6  # mm
MAX_PERTURB = 12

_STL_RECORD = np.dtype([
    ("normal", "<f4", (3,)),
    ("v", "<f4", (3, 3)),
    ("attr", "<u2"),
])


class MeshError(ValueError):
    """Raised for unreadable, malformed or degenerate meshes."""


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        tris = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(tris) == 0:
            raise MeshError("mesh has no triangles")
        if tris.min() < 0 or tris.max() >= len(verts):
            raise MeshError("triangle index out of range")
        e1 = verts[tris[:, 1]] - verts[tris[:, 0]]
        e2 = verts[tris[:, 2]] - verts[tris[:, 0]]
        cross = np.cross(e1, e2)
        norm = np.linalg.norm(cross, axis=1)
        bad = np.flatnonzero(0.5 * norm <= AREA_TOL)
        if len(bad):
            raise MeshError(f"{len(bad)} degenerate triangle(s), first at index {bad[0]}")
        normals = cross / norm[:, None]
        for arr in (verts, tris, normals):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "normals", normals)

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def corners(self) -> np.ndarray:
        """(m, 3, 3) array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    @classmethod
    def from_triangle_soup(cls, soup) -> "TriangleMesh":
        """Build a mesh from an (m, 3, 3) array, merging bit-identical vertices."""
        soup = np.asarray(soup, dtype=np.float64).reshape(-1, 3)
        uniq, first, inverse = np.unique(soup, axis=0, return_index=True, return_inverse=True)
        # keep vertices in order of first appearance
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        return cls(uniq[order], rank[inverse.reshape(-1)].reshape(-1, 3))


@dataclass(frozen=True)
class AnatomicalFrame:
    """Sagittal plane given by a point and its unit (left-right) normal."""

    sagittal_origin: np.ndarray
    sagittal_normal: np.ndarray

    def __post_init__(self):
        origin = np.array(self.sagittal_origin, dtype=np.float64).reshape(3)
        normal = np.array(self.sagittal_normal, dtype=np.float64).reshape(3)
        length = np.linalg.norm(normal)
        if not np.isfinite(length) or length == 0:
            raise ValueError("sagittal normal must be non-zero")
        if abs(length - 1.0) > 1e-9:
            normal = normal / length
        object.__setattr__(self, "sagittal_origin", origin)
        object.__setattr__(self, "sagittal_normal", normal)

    def signed_distance(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.sagittal_origin) @ self.sagittal_normal


def _parse_ascii(data: bytes) -> np.ndarray:
    lines = data.decode("ascii", errors="replace").splitlines()
    facets = []
    state = "solid"
    verts: list[list[float]] = []
    for lineno, raw in enumerate(lines, start=1):
        tok = raw.split()
        if not tok:
            continue
        try:
            if state == "solid":
                if tok[0] != "solid":
                    raise MeshError(f"line {lineno}: expected 'solid'")
                state = "facet"
            elif state == "facet":
                if tok[0] == "endsolid":
                    state = "done"
                    break
                if tok[:2] != ["facet", "normal"] or len(tok) != 5:
                    raise MeshError(f"line {lineno}: expected 'facet normal nx ny nz'")
                [float(t) for t in tok[2:]]
                state = "outer"
            elif state == "outer":
                if tok != ["outer", "loop"]:
                    raise MeshError(f"line {lineno}: expected 'outer loop'")
                state = "vertex"
            elif state == "vertex":
                if tok[0] != "vertex" or len(tok) != 4:
                    raise MeshError(f"line {lineno}: expected 'vertex x y z'")
                verts.append([float(t) for t in tok[1:]])
                if len(verts) == 3:
                    facets.append(verts)
                    verts = []
                    state = "endloop"
            elif state == "endloop":
                if tok != ["endloop"]:
                    raise MeshError(f"line {lineno}: expected 'endloop'")
                state = "endfacet"
            elif state == "endfacet":
                if tok != ["endfacet"]:
                    raise MeshError(f"line {lineno}: expected 'endfacet'")
                state = "facet"
        except ValueError as exc:
            if isinstance(exc, MeshError):
                raise
            raise MeshError(f"line {lineno}: bad number in {raw.strip()!r}") from None
    if state != "done":
        raise MeshError(f"line {len(lines)}: unexpected end of file (missing 'endsolid')")
    if not facets:
        raise MeshError("ASCII STL contains no facets")
    return np.array(facets, dtype=np.float64)


def _parse_binary(data: bytes) -> np.ndarray:
    if len(data) < 84:
        raise MeshError(f"truncated binary STL: {len(data)} bytes, header needs 84")
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) < expected:
        have = (len(data) - 84) // 50
        raise MeshError(f"truncated binary STL: header declares {count} facets, file holds {have}")
    records = np.frombuffer(data, dtype=_STL_RECORD, count=count, offset=84)
    return records["v"].astype(np.float64)


def _looks_binary(data: bytes) -> bool:
    if len(data) >= 84:
        (count,) = struct.unpack_from("<I", data, 80)
        if 84 + 50 * count == len(data):
            return True
    return not data.lstrip()[:5].lower() == b"solid"


def load_mesh(path) -> TriangleMesh:
    """Read an ASCII or binary STL file into a deduplicated TriangleMesh."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise MeshError(f"cannot read mesh {path}: {exc.strerror}") from exc
    soup = _parse_binary(data) if _looks_binary(data) else _parse_ascii(data)
    return TriangleMesh.from_triangle_soup(soup)


def save_stl(mesh: TriangleMesh, path, binary: bool = True, name: str = "iafc") -> None:
    """Write the mesh as STL; the file is replaced atomically."""
    tmp = f"{path}.tmp{os.getpid()}"
    corners = mesh.corners
    if binary:
        rec = np.zeros(len(corners), dtype=_STL_RECORD)
        rec["normal"] = mesh.normals
        rec["v"] = corners
        header = name.encode("ascii")[:80].ljust(80, b" ")
        with open(tmp, "wb") as fh:
            fh.write(header)
            fh.write(struct.pack("<I", len(rec)))
            fh.write(rec.tobytes())
    else:
        with open(tmp, "w", encoding="ascii") as fh:
            fh.write(f"solid {name}\n")
            for n, tri in zip(mesh.normals, corners):
                fh.write("  facet normal {} {} {}\n".format(*map(repr, n.tolist())))
                fh.write("    outer loop\n")
                for v in tri.tolist():
                    fh.write("      vertex {} {} {}\n".format(*map(repr, v)))
                fh.write("    endloop\n  endfacet\n")
            fh.write(f"endsolid {name}\n")
    os.replace(tmp, path)


def _moller_trumbore(corners, origin, direction):
    """Return (t, u, v, hit mask) for one ray against every triangle."""
    v0 = corners[:, 0]
    e1 = corners[:, 1] - v0
    e2 = corners[:, 2] - v0
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-15
    inv = np.zeros_like(det)
    inv[ok] = 1.0 / det[ok]
    tvec = origin - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = (qvec @ direction) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    tol = BOUNDARY_TOL
    hit = ok & (u >= -tol) & (v >= -tol) & (u + v <= 1 + tol) & (t > 0)
    return t, u, v, hit


def _perturbations(direction):
    """Deterministic axis-cyclic offsets perpendicular to the ray."""
    for k in range(MAX_PERTURB):
        off = np.zeros(3)
        off[k % 3] = PERTURB_EPS * (1 + k // 3)
        off -= (off @ direction) * direction
        if np.linalg.norm(off) > 0.5 * PERTURB_EPS:
            yield off


def ray_mesh_intersections(mesh: TriangleMesh, origin, direction) -> list[tuple[float, np.ndarray]]:
    """All hits with t > 0 along the ray, sorted by t.

    A hit landing within BOUNDARY_TOL of a triangle edge or vertex makes the
    ray ambiguous; it is then re-cast from a slightly shifted origin so that
    each surface crossing is counted exactly once.
    """
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise ValueError("ray direction must be a unit vector")
    corners = mesh.corners
    cast_origin = origin
    offsets = _perturbations(direction)
    while True:
        t, u, v, hit = _moller_trumbore(corners, cast_origin, direction)
        w = 1.0 - u - v
        edge = hit & ((u <= BOUNDARY_TOL) | (v <= BOUNDARY_TOL) | (w <= BOUNDARY_TOL))
        if not edge.any():
            break
        off = next(offsets, None)
        if off is None:
            break
        cast_origin = origin + off
    idx = np.flatnonzero(hit)
    idx = idx[np.argsort(t[idx], kind="stable")]
    out = []
    shifted = cast_origin is not origin
    for i in idx:
        if shifted:
            # the shifted ray only identified the triangles; intersect the
            # original ray with each one's plane
            n = mesh.normals[i]
            ti = float((corners[i, 0] - origin) @ n / (direction @ n))
            out.append((ti, origin + ti * direction))
        else:
            p = corners[i, 0] + u[i] * (corners[i, 1] - corners[i, 0]) + v[i] * (corners[i, 2] - corners[i, 0])
            out.append((float(t[i]), p))
    if shifted:
        out.sort(key=lambda h: h[0])
    return out
