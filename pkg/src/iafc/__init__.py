"""Constant-curvature fixation channel planning on voxelized bone models."""
from .arc_geometry import (Channel, GeometryError, arc_through_points, sample_channel,
                           straight_through_points)
from .config import PlannerConfig, load_config
from .errors import ConfigError, NoViableChannel, PlanningError
from .mesh_io import AnatomicalFrame, MeshError, TriangleMesh, load_mesh, ray_mesh_intersections, save_stl
from .planner import ComparisonReport, PlanReport, compare, plan
from .scoring import ChannelScore, score_channel
from .seeding import LatticeShape, SeedLattices, SeedSpec, make_lattice
from .selection import CandidateRef, enumerate_arcs, enumerate_straights, select_best
from .voxel_field import (OUTSIDE, VoxelDistanceField, VoxelGrid, build_distance_field, erode_once,
                          query_distance, voxelize)

__version__ = "0.1.0"
