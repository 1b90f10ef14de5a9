import numpy as np
import pytest

from iafc.mesh_io import AnatomicalFrame
from iafc.phantoms import c_plate, cuboid
from iafc.seeding import LatticeShape, SeedSpec
from iafc.voxel_field import VoxelGrid, build_distance_field


def block_field(shape, pad=1, connectivity=6):
    """Solid box of ``shape`` voxels with ``pad`` empty voxels around it.

    Voxel (i, j, k) spans [i, i+1) x [j, j+1) x [k, k+1) mm.
    """
    occ = np.zeros(tuple(s + 2 * pad for s in shape), bool)
    occ[tuple(slice(pad, pad + s) for s in shape)] = True
    return build_distance_field(VoxelGrid((0.5, 0.5, 0.5), 1.0, occ), connectivity)


def cityblock_oracle(occ):
    """Brute force: city-block distance to the nearest unoccupied voxel, minus one.

    The grid is padded with one empty layer so the exterior counts as unoccupied.
    """
    padded = np.pad(occ, 1)
    empty = np.argwhere(~padded)
    out = np.full(occ.shape, -1, dtype=np.int64)
    for v in np.argwhere(occ):
        d = np.abs(empty - (v + 1)).sum(axis=1).min()
        out[tuple(v)] = d - 1
    return out


C_PLATE_SEEDS = dict(entry=(-80.0, 0.0, -35.0), middle=(0.0, 0.0, -60.0), exit=(80.0, 0.0, -35.0))


def c_plate_spec(entry=C_PLATE_SEEDS["entry"], middle=C_PLATE_SEEDS["middle"], exit=C_PLATE_SEEDS["exit"],
                 lattice=LatticeShape(10, 10, 2.0), middle_lattice=LatticeShape(5, 5, 1.0)):
    frame = AnatomicalFrame((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))
    return SeedSpec(entry, middle, exit, frame, lattice, middle_lattice, lattice)


@pytest.fixture(scope="session")
def c_plate_mesh():
    return c_plate(thickness=8.0, radius=60.0, sweep_deg=120.0)


@pytest.fixture(scope="session")
def cuboid_mesh():
    return cuboid((40.0, 20.0, 20.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


SLAB_VDVA = [0, 1, 1, 2, 2, 2, 2, 2, 1, 1, 0, 0]
SLAB_ARC = ((6.28, 1.46, 5.5), (11.0, 3.47, 5.5), (15.72, 1.46, 5.5))


def slab_field():
    """Slab five voxels thick in y (shells 0,1,2,1,0), 22 long in x, 9 deep in z."""
    occ = np.zeros((24, 7, 11), bool)
    occ[1:23, 1:6, 1:10] = True
    return build_distance_field(VoxelGrid((0.5, 0.5, 0.5), 1.0, occ))


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record and print a one-line PASS/FAIL verdict, then assert it."""
    def record(number, title, ok, detail=""):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
