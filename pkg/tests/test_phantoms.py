import math
from collections import Counter

import numpy as np
import pytest

from iafc.arc_geometry import arc_through_points, sample_channel
from iafc.phantoms import c_plate, cuboid, generate_phantom, signed_volume, torus_segment, uv_sphere
from iafc.voxel_field import build_distance_field, voxelize


def c_plate_inside(p, thickness=8.0, radius=60.0, sweep_deg=120.0, width=20.0):
    """Analytic membership for the ideal (untessellated) curved plate."""
    p = np.atleast_2d(p)
    r = np.hypot(p[:, 0], p[:, 2])
    phi = np.degrees(np.arctan2(p[:, 2], p[:, 0])) % 360.0
    return ((np.abs(r - radius) <= thickness / 2) & (np.abs(p[:, 1]) <= width / 2)
            & (np.abs(phi - 270.0) <= sweep_deg / 2))


def c_plate_depth(p, thickness=8.0, radius=60.0, sweep_deg=120.0, width=20.0):
    """Distance to the surface of the ideal plate for points inside it."""
    r = np.hypot(p[:, 0], p[:, 2])
    phi = np.radians(np.degrees(np.arctan2(p[:, 2], p[:, 0])) % 360.0 - 270.0)
    to_end = r * np.sin(np.radians(sweep_deg / 2) - np.abs(phi))
    return np.minimum.reduce([thickness / 2 - np.abs(r - radius), width / 2 - np.abs(p[:, 1]), to_end])


def assert_closed_manifold(mesh):
    edges = Counter()
    for tri in mesh.triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            edges[(int(a), int(b))] += 1
    for (a, b), n in edges.items():
        assert n == 1 and edges[(b, a)] == 1


@pytest.mark.parametrize("mesh", [cuboid(), c_plate(segments=24), torus_segment(segments=24, sides=8),
                                  uv_sphere(3.0, n_lat=6, n_lon=12),
                                  uv_sphere(3.0, n_lat=6, n_lon=12, hemisphere=True)])
def test_closed_and_outward(mesh):
    assert_closed_manifold(mesh)
    assert signed_volume(mesh) > 0


def test_cuboid():
    m = cuboid((40, 20, 20))
    assert len(m.triangles) == 12
    assert signed_volume(m) == pytest.approx(16000.0)
    assert voxelize(m, 1.0).occupancy.sum() == 40 * 20 * 20


def test_c_plate_volume():
    m = c_plate()
    exact = 8.0 * 20.0 * 60.0 * math.radians(120.0)
    # chords cut the curved faces: volume sits just below the ideal solid
    assert 0.995 * exact < signed_volume(m) < exact


@pytest.mark.parametrize("name,params", [("c_plate", {"sweep_deg": 0}), ("torus_segment", {"sweep_deg": 0}),
                                         ("c_plate", {"thickness": 0}), ("cuboid", {"size": (1, 0, 1)}),
                                         ("torus_segment", {"tube_radius": 70})])
def test_degenerate_params(name, params):
    with pytest.raises(ValueError):
        generate_phantom(name, **params)


def test_unknown_phantom():
    with pytest.raises(ValueError, match="unknown phantom"):
        generate_phantom("pelvis")


def test_c_plate_mid_surface_arc_stays_deep():
    # an arc of radius 60 along the mid-surface, 10 degrees short of each end
    ang = np.radians([220.0, 270.0, 320.0])
    pts = np.stack([60 * np.cos(ang), np.zeros(3), 60 * np.sin(ang)], axis=1)
    ch = arc_through_points(*pts)
    assert ch.radius == pytest.approx(60.0)
    samples = sample_channel(ch, 0.25)
    assert c_plate_inside(samples).all()
    assert c_plate_depth(samples).min() >= 3.0
    field = build_distance_field(voxelize(c_plate(), 1.0))
    assert field.lookup(sample_channel(ch, 1.0)).min() >= 3


def test_c_plate_chords_between_ends_exit(rng):
    # random points inside the last 15 degrees of each end
    def end_points(lo, hi, n):
        phi = np.radians(rng.uniform(lo, hi, n))
        r = rng.uniform(56, 64, n)
        return np.stack([r * np.cos(phi), rng.uniform(-10, 10, n), r * np.sin(phi)], axis=1)

    a, b = end_points(210, 225, 300), end_points(315, 330, 300)
    t = np.linspace(0, 1, 401)[:, None]
    for p, q in zip(a, b):
        seg = p + t * (q - p)
        assert not c_plate_inside(seg).all()
