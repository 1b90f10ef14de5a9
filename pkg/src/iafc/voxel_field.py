"""Voxelization and erosion-depth distance field.

Each voxel of the bone model stores the erosion pass at which it is peeled
away: 0 for the outermost layer, 1 for the layer beneath it, and so on.
Empty voxels carry OUTSIDE, which sorts below every depth so that a single
``min`` over a channel rejects channels that leave the bone.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .mesh_io import BOUNDARY_TOL, MAX_PERTURB, PERTURB_EPS, MeshError, TriangleMesh

OUTSIDE = -1
CONNECTIVITIES = (6, 26)


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Regular grid; ``origin`` is the centre of voxel (0, 0, 0)."""

    origin: np.ndarray
    pitch: float
    occupancy: np.ndarray

    def __post_init__(self):
        if not self.pitch > 0:
            raise ValueError(f"voxel pitch must be positive, got {self.pitch}")
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.ndim != 3 or min(occ.shape) < 1:
            raise ValueError(f"occupancy must be a non-empty 3D array, got shape {occ.shape}")
        object.__setattr__(self, "origin", np.array(self.origin, dtype=np.float64).reshape(3))
        object.__setattr__(self, "pitch", float(self.pitch))
        object.__setattr__(self, "occupancy", occ)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.occupancy.shape

    def centers(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.pitch * np.arange(self.dims[axis])

    def voxel_index(self, points) -> np.ndarray:
        """Integer index of the voxel containing each point.

        Voxel i spans [c_i - pitch/2, c_i + pitch/2); a point on a shared face
        goes to the higher index.
        """
        rel = (np.asarray(points, dtype=np.float64) - self.origin) / self.pitch + 0.5
        return np.floor(rel).astype(np.int64)

    def contains_occupied(self, points) -> np.ndarray:
        idx = np.atleast_2d(self.voxel_index(points))
        dims = np.array(self.dims)
        ok = np.all((idx >= 0) & (idx < dims), axis=1)
        out = np.zeros(len(idx), dtype=bool)
        i = idx[ok]
        out[ok] = self.occupancy[i[:, 0], i[:, 1], i[:, 2]]
        return out


@dataclass(frozen=True, eq=False)
class VoxelDistanceField:
    grid: VoxelGrid
    values: np.ndarray
    connectivity: int = 6

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.int16)
        if vals.shape != self.grid.dims:
            raise ValueError("value array does not match grid dims")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_flat", vals.ravel())
        d = np.array(self.grid.dims, dtype=np.int64)
        object.__setattr__(self, "_dims", d)
        object.__setattr__(self, "_strides", np.array([d[1] * d[2], d[2], 1], dtype=np.int64))

    @property
    def max_depth(self) -> int:
        return int(self.values.max())

    def lookup(self, points) -> np.ndarray:
        """Distance values for an (..., 3) array of points; OUTSIDE off-grid."""
        pts = np.asarray(points, dtype=np.float64)
        return self.lookup_coords(pts[..., 0], pts[..., 1], pts[..., 2])

    def lookup_coords(self, xs, ys, zs) -> np.ndarray:
        """Like :meth:`lookup` but with the coordinates given as separate arrays."""
        g = self.grid
        flat = None
        ok = None
        for axis, coord in enumerate((xs, ys, zs)):
            t = np.subtract(coord, g.origin[axis])
            t /= g.pitch
            t += 0.5
            np.floor(t, out=t)
            inside = (t >= 0) & (t < self._dims[axis])
            ok = inside if ok is None else ok & inside
            idx = t.astype(np.int64)
            if axis < 2:
                idx *= self._strides[axis]
            flat = idx if flat is None else flat + idx
        flat[~ok] = 0
        out = self._flat[flat]
        out[~ok] = OUTSIDE
        return out


def query_distance(field: VoxelDistanceField, point) -> int:
    """Erosion depth of the voxel containing ``point`` (OUTSIDE off-grid or empty)."""
    return int(field.lookup(np.asarray(point, dtype=np.float64).reshape(1, 3))[0])


def grid_for_bounds(lo, hi, pitch: float) -> tuple[np.ndarray, tuple[int, int, int]]:
    """Origin and dims covering [lo, hi] with one empty voxel of margin per side."""
    if not pitch > 0:
        raise ValueError(f"voxel pitch must be positive, got {pitch}")
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if np.any(hi - lo <= 0):
        raise MeshError(f"degenerate mesh bounding box extent {(hi - lo).tolist()}")
    dims = tuple(int(math.ceil((h - l) / pitch)) + 2 for l, h in zip(lo, hi))
    origin = lo - 0.5 * pitch
    return origin, dims


def _column_hits(tri_yz, tri_x, ys, zs, tol=BOUNDARY_TOL):
    """Intersect +x rays at (ys, zs) with one triangle projected onto yz.

    Returns (mask of hit rays, hit x, mask of rays hitting the boundary).
    """
    (ay, az), (by, bz), (cy, cz) = tri_yz
    det = (by - ay) * (cz - az) - (bz - az) * (cy - ay)
    py = ys - ay
    pz = zs - az
    l1 = (py * (cz - az) - pz * (cy - ay)) / det
    l2 = ((by - ay) * pz - (bz - az) * py) / det
    l0 = 1.0 - l1 - l2
    inside = (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol)
    edge = inside & ((l0 <= tol) | (l1 <= tol) | (l2 <= tol))
    x = l0 * tri_x[0] + l1 * tri_x[1] + l2 * tri_x[2]
    return inside, x, edge


def voxelize(mesh: TriangleMesh, pitch: float = 1.0) -> VoxelGrid:
    """Occupancy grid: a voxel is filled iff its centre is inside the mesh.

    Inside-ness is decided by crossing parity along +x rays, one per (y, z)
    column of voxel centres. Columns whose ray grazes a triangle edge are
    re-cast from a slightly shifted position.
    """
    lo, hi = mesh.bounds
    origin, dims = grid_for_bounds(lo, hi, pitch)
    nx, ny, nz = dims
    yc = origin[1] + pitch * np.arange(ny)
    zc = origin[2] + pitch * np.arange(nz)
    corners = mesh.corners

    hit_cols: list[np.ndarray] = []
    hit_x: list[np.ndarray] = []
    ambiguous = np.zeros((ny, nz), dtype=bool)
    for tri in corners:
        yz = tri[:, 1:]
        det = (yz[1, 0] - yz[0, 0]) * (yz[2, 1] - yz[0, 1]) - (yz[1, 1] - yz[0, 1]) * (yz[2, 0] - yz[0, 0])
        if abs(det) <= 1e-12:
            continue  # parallel to the rays
        j0 = max(int(math.ceil((yz[:, 0].min() - origin[1]) / pitch - 1e-7)), 0)
        j1 = min(int(math.floor((yz[:, 0].max() - origin[1]) / pitch + 1e-7)), ny - 1)
        k0 = max(int(math.ceil((yz[:, 1].min() - origin[2]) / pitch - 1e-7)), 0)
        k1 = min(int(math.floor((yz[:, 1].max() - origin[2]) / pitch + 1e-7)), nz - 1)
        if j1 < j0 or k1 < k0:
            continue
        jj, kk = np.meshgrid(np.arange(j0, j1 + 1), np.arange(k0, k1 + 1), indexing="ij")
        jj = jj.ravel()
        kk = kk.ravel()
        inside, x, edge = _column_hits(yz, tri[:, 0], yc[jj], zc[kk])
        ambiguous[jj[edge], kk[edge]] = True
        hit_cols.append(jj[inside] * nz + kk[inside])
        hit_x.append(x[inside])

    cols = np.concatenate(hit_cols) if hit_cols else np.zeros(0, dtype=np.int64)
    xs = np.concatenate(hit_x) if hit_x else np.zeros(0)
    amb_flat = np.flatnonzero(ambiguous.ravel())
    if len(amb_flat):
        keep = ~np.isin(cols, amb_flat)
        cols, xs = cols[keep], xs[keep]
        extra_c, extra_x = [], []
        for col in amb_flat:
            j, k = divmod(int(col), nz)
            xr = _recast_column(corners, yc[j], zc[k])
            extra_c.append(np.full(len(xr), col, dtype=np.int64))
            extra_x.append(xr)
        cols = np.concatenate([cols] + extra_c)
        xs = np.concatenate([xs] + extra_x)

    # a crossing at x toggles parity for every centre strictly beyond x
    first = np.clip(np.floor((xs - origin[0]) / pitch).astype(np.int64) + 1, 0, nx)
    toggles = np.zeros((ny * nz, nx + 1), dtype=np.int32)
    np.add.at(toggles, (cols, first), 1)
    parity = np.cumsum(toggles[:, :nx], axis=1) % 2 == 1
    occ = parity.reshape(ny, nz, nx).transpose(2, 0, 1)
    return VoxelGrid(origin, pitch, np.ascontiguousarray(occ))


def _recast_column(corners, y, z) -> np.ndarray:
    """Crossing x-coordinates of a +x ray near (y, z) avoiding triangle edges."""
    yz = corners[:, :, 1:]
    a, b, c = yz[:, 0], yz[:, 1], yz[:, 2]
    det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
    usable = np.abs(det) > 1e-12
    safe = np.where(usable, det, 1.0)
    for k in range(MAX_PERTURB + 1):
        dy = dz = 0.0
        if k:
            step = PERTURB_EPS * (1 + (k - 1) // 2)
            dy, dz = (step, 0.0) if k % 2 else (0.0, step)
        py = y + dy - a[:, 0]
        pz = z + dz - a[:, 1]
        l1 = (py * (c[:, 1] - a[:, 1]) - pz * (c[:, 0] - a[:, 0])) / safe
        l2 = ((b[:, 0] - a[:, 0]) * pz - (b[:, 1] - a[:, 1]) * py) / safe
        l0 = 1.0 - l1 - l2
        tol = BOUNDARY_TOL
        inside = usable & (l0 >= -tol) & (l1 >= -tol) & (l2 >= -tol)
        edge = inside & ((l0 <= tol) | (l1 <= tol) | (l2 <= tol))
        if not edge.any():
            break
    x = l0 * corners[:, 0, 0] + l1 * corners[:, 1, 0] + l2 * corners[:, 2, 0]
    return x[inside]


def _neighbour_min(occ: np.ndarray, connectivity: int) -> np.ndarray:
    """True where a voxel and all its neighbours are occupied (grid exterior is empty)."""
    p = np.pad(occ, 1, constant_values=False)
    if connectivity == 6:
        c = p[1:-1, 1:-1, 1:-1]
        return (c & p[:-2, 1:-1, 1:-1] & p[2:, 1:-1, 1:-1]
                & p[1:-1, :-2, 1:-1] & p[1:-1, 2:, 1:-1]
                & p[1:-1, 1:-1, :-2] & p[1:-1, 1:-1, 2:])
    # 3x3x3 cube erosion is separable into three 1D passes
    p = p[:-2] & p[1:-1] & p[2:]
    p = p[:, :-2] & p[:, 1:-1] & p[:, 2:]
    return p[:, :, :-2] & p[:, :, 1:-1] & p[:, :, 2:]


def erode_once(occupancy: np.ndarray, connectivity: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """One erosion pass. Returns (peeled mask, remaining mask).

    A voxel is peeled when any neighbour under ``connectivity`` (6 or 26) is
    empty. The update is synchronous: every decision reads the input grid.
    """
    if connectivity not in CONNECTIVITIES:
        raise ValueError(f"connectivity must be 6 or 26, got {connectivity}")
    occ = np.asarray(occupancy, dtype=bool)
    remaining = _neighbour_min(occ, connectivity)
    return occ & ~remaining, remaining


def build_distance_field(grid: VoxelGrid, connectivity: int = 6) -> VoxelDistanceField:
    """Label every occupied voxel with the erosion pass that removes it."""
    values = np.full(grid.dims, OUTSIDE, dtype=np.int16)
    current = grid.occupancy.copy()
    cap = sum(grid.dims)
    depth = 0
    while current.any():
        if depth > cap:
            raise RuntimeError("erosion did not terminate")
        peeled, current = erode_once(current, connectivity)
        values[peeled] = depth
        depth += 1
    return VoxelDistanceField(grid, values, connectivity)


def write_field_dump(field: VoxelDistanceField, path) -> None:
    """Flat binary dump: one text header line, then int16 LE values, x fastest."""
    g = field.grid
    header = "IAFC-FIELD dims={},{},{} origin={!r},{!r},{!r} pitch={!r} outside={}\n".format(
        *g.dims, *map(float, g.origin), g.pitch, OUTSIDE)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(field.values.astype("<i2").ravel(order="F").tobytes())
    os.replace(tmp, path)


def read_field_dump(path) -> VoxelDistanceField:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        body = fh.read()
    if not header or header[0] != "IAFC-FIELD":
        raise ValueError(f"{path}: not a field dump")
    meta = dict(item.split("=", 1) for item in header[1:])
    dims = tuple(int(v) for v in meta["dims"].split(","))
    origin = [float(v) for v in meta["origin"].split(",")]
    values = np.frombuffer(body, dtype="<i2")
    if values.size != dims[0] * dims[1] * dims[2]:
        raise ValueError(f"{path}: body holds {values.size} values, header needs {np.prod(dims)}")
    values = values.reshape(dims, order="F")
    grid = VoxelGrid(origin, float(meta["pitch"]), values != OUTSIDE)
    return VoxelDistanceField(grid, values)
