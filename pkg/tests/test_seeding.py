import math

import numpy as np
import pytest

from conftest import block_field, c_plate_spec
from iafc.errors import PlanningError
from iafc.mesh_io import AnatomicalFrame
from iafc.phantoms import cuboid, uv_sphere
from iafc.seeding import (LatticeShape, SeedSpec, build_seed_lattices, lattice_axes, make_lattice,
                          project_to_surface, prune_outside)
from iafc.voxel_field import voxelize

X_FRAME = AnatomicalFrame((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))


def test_single_point_lattice():
    pts = make_lattice((3.0, 4.0, 5.0), X_FRAME, 1, 1, 2.0)
    np.testing.assert_array_equal(pts, [[3.0, 4.0, 5.0]])


def test_ten_by_ten_span():
    pts = make_lattice((0.0, 0.0, 0.0), X_FRAME, 10, 10, 2.0)
    assert len(pts) == 100
    np.testing.assert_allclose(pts[:, 0], 0.0)
    assert np.ptp(pts[:, 1]) == pytest.approx(18.0) and np.ptp(pts[:, 2]) == pytest.approx(18.0)
    np.testing.assert_allclose(pts.mean(axis=0), 0.0, atol=1e-12)


def test_three_by_one_collinear():
    pts = make_lattice((1.0, 1.0, 1.0), X_FRAME, 3, 1, 5.0)
    d = np.diff(pts, axis=0)
    np.testing.assert_allclose(np.linalg.norm(d, axis=1), 5.0)
    assert np.linalg.norm(np.cross(d[0], d[1])) < 1e-12


def test_axes_orthonormal_and_deterministic(rng):
    for _ in range(50):
        n = rng.normal(size=3)
        f = AnatomicalFrame((0, 0, 0), n)
        u, v = lattice_axes(f)
        m = np.stack([u, v, f.sagittal_normal])
        np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-12)
        u2, v2 = lattice_axes(AnatomicalFrame((1, 2, 3), n))
        np.testing.assert_array_equal(u, u2)
    # normal along world vertical falls back to the anterior axis
    u, v = lattice_axes(AnatomicalFrame((0, 0, 0), (0, 0, 1)))
    np.testing.assert_allclose(u, [0, 1, 0])


def test_project_onto_planar_face():
    mesh = cuboid((10, 10, 10))
    lattice = make_lattice((-5.0, 5.0, 5.0), X_FRAME, 3, 3, 2.0)
    hits, kept = project_to_surface(lattice, X_FRAME, mesh, toward=+1)
    assert len(hits) == 9
    np.testing.assert_array_equal(hits[:, 0], 0.0)
    np.testing.assert_allclose(hits[:, 1:], lattice[:, 1:], atol=1e-12)


def test_missing_ray_is_dropped():
    mesh = cuboid((10, 10, 10))
    pts = np.array([[-5.0, 5.0, 5.0], [-5.0, 50.0, 5.0]])
    hits, kept = project_to_surface(pts, X_FRAME, mesh, toward=+1)
    assert kept.tolist() == [0]


def test_projection_onto_hemisphere():
    n_lat, n_lon, R = 24, 48, 20.0
    mesh = uv_sphere(R, n_lat=n_lat, n_lon=n_lon, hemisphere=True)
    frame = AnatomicalFrame((0, 0, 0), (0, 0, 1))
    lattice = make_lattice((0.3, 0.2, 40.0), frame, 10, 10, 2.0)
    hits, kept = project_to_surface(lattice, frame, mesh, toward=-1)
    assert len(hits) == 100
    corners = mesh.corners
    for p in hits:
        # on the plane of a facet that contains it
        n = mesh.normals
        d = np.abs(np.einsum("ij,ij->i", p - corners[:, 0], n))
        assert d.min() <= 1e-9
        # and between the inscribed facets and the true sphere
        r = np.linalg.norm(p)
        sag = R * (1 - math.cos(math.pi / 2 / n_lat)) + R * (1 - math.cos(math.pi / n_lon))
        assert R - sag <= r <= R + 1e-9


def test_prune_outside():
    f = block_field((5, 5, 5))
    pts = np.array([[3.5, 3.5, 3.5], [13.5, 3.5, 3.5]])
    kept, idx = prune_outside(pts, f.grid)
    assert idx.tolist() == [0]
    with pytest.raises(PlanningError, match="no viable seed points on exit"):
        prune_outside(pts[1:], f.grid, label="exit")


def test_inset_moves_surface_points_inside():
    f = block_field((5, 5, 5))
    surface = np.array([[1.0, 3.5, 3.5]])  # on the low x face
    kept, _ = prune_outside(surface, f.grid, inset=1.0, direction=(1, 0, 0))
    np.testing.assert_array_equal(kept, [[2.0, 3.5, 3.5]])


def test_seed_spec_requires_opposite_sides():
    with pytest.raises(ValueError, match="opposite sides"):
        SeedSpec((-1, 0, 0), (0, 0, 0), (-2, 0, 0), X_FRAME)
    with pytest.raises(ValueError):
        LatticeShape(3, 3, 0.0)
    with pytest.raises(ValueError):
        LatticeShape(0, 3, 1.0)


def test_c_plate_lattices(c_plate_mesh):
    grid = voxelize(c_plate_mesh, 1.0)
    spec = c_plate_spec()
    lat = build_seed_lattices(c_plate_mesh, grid, spec)
    frame = spec.frame
    assert lat.sizes == (80, 25, 80)
    for pts in (lat.entry_points, lat.middle_points, lat.exit_points):
        assert grid.contains_occupied(pts).all()
    assert np.all(frame.signed_distance(lat.entry_points) < 0)
    assert np.all(frame.signed_distance(lat.exit_points) > 0)
    # provenance refers back to the 10x10 lattice rows/cols
    assert lat.entry_ids.shape == (80, 2) and lat.entry_ids.max() <= 9
    again = build_seed_lattices(c_plate_mesh, grid, spec)
    np.testing.assert_array_equal(again.entry_points, lat.entry_points)
    np.testing.assert_array_equal(again.exit_ids, lat.exit_ids)


def test_middle_lattice_clipped(c_plate_mesh):
    grid = voxelize(c_plate_mesh, 1.0)
    spec = c_plate_spec(middle_lattice=LatticeShape(10, 10, 1.5))
    lat = build_seed_lattices(c_plate_mesh, grid, spec)
    assert 0 < lat.sizes[1] < 100


def test_all_seeds_miss(c_plate_mesh):
    grid = voxelize(c_plate_mesh, 1.0)
    spec = c_plate_spec(entry=(-80.0, 0.0, 100.0))
    with pytest.raises(PlanningError, match="entry"):
        build_seed_lattices(c_plate_mesh, grid, spec)
