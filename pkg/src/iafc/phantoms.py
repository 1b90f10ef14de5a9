"""Synthetic closed meshes standing in for patient bone models.

``c_plate`` and ``torus_segment`` sweep a cross-section around the y axis
through an arc centred on the -z direction, so the solid hangs like a "U"
below its centre of curvature: the chord between the two ends crosses the
empty cavity while an arc following the sweep stays inside the material.
"""
from __future__ import annotations

import math

import numpy as np

from .mesh_io import TriangleMesh


def cuboid(size=(40.0, 20.0, 20.0), origin=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Axis-aligned box with one corner at ``origin``; 12 outward-facing triangles."""
    size = np.asarray(size, dtype=np.float64)
    if size.shape != (3,) or np.any(size <= 0):
        raise ValueError(f"cuboid size must be three positive lengths, got {size.tolist()}")
    corners = np.array([[i, j, k] for i in (0, 1) for j in (0, 1) for k in (0, 1)], dtype=np.float64)
    verts = np.asarray(origin, dtype=np.float64) + corners * size
    # vertex id = 4i + 2j + k
    quads = [(0, 1, 3, 2), (4, 6, 7, 5),  # x = 0, x = 1
             (0, 4, 5, 1), (2, 3, 7, 6),  # y = 0, y = 1
             (0, 2, 6, 4), (1, 5, 7, 3)]  # z = 0, z = 1
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(verts, np.array(tris))


def _sweep(section, radius_of, sweep_deg, segments, center):
    """Sweep a closed convex (r, y) polygon around the y axis."""
    if not 0 < sweep_deg < 360:
        raise ValueError(f"sweep must be in (0, 360) degrees, got {sweep_deg}")
    if segments < 1:
        raise ValueError("segments must be >= 1")
    section = np.asarray(section, dtype=np.float64)
    k = len(section)
    half = math.radians(sweep_deg) / 2
    phis = 1.5 * math.pi + np.linspace(-half, half, segments + 1)
    r = radius_of(section)
    y = section[:, 1]
    verts = []
    for phi in phis:
        verts.append(np.stack([r * math.cos(phi), y, r * math.sin(phi)], axis=1))
    verts = np.vstack(verts) + np.asarray(center, dtype=np.float64)
    tris = []
    for i in range(segments):
        for j in range(k):
            a, b = i * k + j, i * k + (j + 1) % k
            c, d = a + k, b + k
            tris += [(a, b, d), (a, d, c)]
    last = segments * k
    for j in range(1, k - 1):
        tris.append((0, j + 1, j))
        tris.append((last, last + j, last + j + 1))
    tris = np.array(tris)
    mesh = TriangleMesh(verts, tris)
    if signed_volume(mesh) < 0:
        mesh = TriangleMesh(verts, tris[:, ::-1])
    return mesh


def c_plate(thickness=8.0, radius=60.0, sweep_deg=120.0, width=20.0, segments=96,
            center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Rectangular plate (radial ``thickness`` x axial ``width``) swept along a
    circular arc of mid-surface ``radius``."""
    if not (thickness > 0 and width > 0 and radius > thickness / 2):
        raise ValueError("c_plate needs thickness > 0, width > 0 and radius > thickness / 2")
    r0, r1 = radius - thickness / 2, radius + thickness / 2
    h = width / 2
    section = [(r0, -h), (r1, -h), (r1, h), (r0, h)]
    return _sweep(section, lambda s: s[:, 0], sweep_deg, segments, center)


def torus_segment(tube_radius=6.0, radius=60.0, sweep_deg=120.0, segments=96, sides=24,
                  center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Circular tube of ``tube_radius`` swept along an arc of ``radius``."""
    if not (tube_radius > 0 and radius > tube_radius and sides >= 3):
        raise ValueError("torus_segment needs 0 < tube_radius < radius and sides >= 3")
    t = np.linspace(0, 2 * math.pi, sides, endpoint=False)
    section = np.stack([radius + tube_radius * np.cos(t), tube_radius * np.sin(t)], axis=1)
    return _sweep(section, lambda s: s[:, 0], sweep_deg, segments, center)


def uv_sphere(radius=5.0, center=(0.0, 0.0, 0.0), n_lat=24, n_lon=48, hemisphere=False) -> TriangleMesh:
    """Latitude/longitude sphere; with ``hemisphere`` the z >= 0 dome closed by a flat disk."""
    if radius <= 0:
        raise ValueError("sphere radius must be positive")
    lat_max = math.pi / 2 if hemisphere else math.pi
    lats = np.linspace(0, lat_max, n_lat + 1)[1:]
    if not hemisphere:
        lats = lats[:-1]
    lons = np.linspace(0, 2 * math.pi, n_lon, endpoint=False)
    verts = [[0.0, 0.0, radius]]
    for th in lats:
        for ph in lons:
            verts.append([radius * math.sin(th) * math.cos(ph), radius * math.sin(th) * math.sin(ph),
                          radius * math.cos(th)])
    bottom = len(verts)
    verts.append([0.0, 0.0, 0.0 if hemisphere else -radius])
    verts = np.array(verts) + np.asarray(center, dtype=np.float64)
    tris = []
    ring = lambda r, j: 1 + r * n_lon + j % n_lon  # noqa: E731
    for j in range(n_lon):
        tris.append((0, ring(0, j), ring(0, j + 1)))
    for r in range(len(lats) - 1):
        for j in range(n_lon):
            a, b = ring(r, j), ring(r, j + 1)
            c, d = ring(r + 1, j), ring(r + 1, j + 1)
            tris += [(a, c, d), (a, d, b)]
    last = len(lats) - 1
    for j in range(n_lon):
        tris.append((bottom, ring(last, j + 1), ring(last, j)))
    return TriangleMesh(verts, np.array(tris))


def signed_volume(mesh: TriangleMesh) -> float:
    c = mesh.corners
    return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)


PHANTOMS = {"cuboid": cuboid, "c_plate": c_plate, "torus_segment": torus_segment}


def generate_phantom(name: str, **params) -> TriangleMesh:
    try:
        factory = PHANTOMS[name]
    except KeyError:
        raise ValueError(f"unknown phantom {name!r}; choose from {sorted(PHANTOMS)}") from None
    return factory(**params)
