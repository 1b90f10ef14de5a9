"""
When both channel shapes fit
============================

A thick plate leaves room for straight channels too. The arc search always
contains near-straight candidates, so its best safety value should match
or beat the straight one. A small exhaustive sweep confirms the ranking.
"""

import itertools

from iafc.arc_geometry import arc_through_points, straight_through_points
from iafc.config import LatticeConfig, PlannerConfig
from iafc.phantoms import c_plate
from iafc.planner import compare, prepare
from iafc.scoring import score_channel

mesh = c_plate(thickness=40.0, radius=60.0, sweep_deg=110.0, width=30.0)
cfg = PlannerConfig(
    entry_seed=(-80.0, 0.0, -35.0), middle_seed=(0.0, 0.0, -60.0), exit_seed=(80.0, 0.0, -35.0),
    middle_lattice=LatticeConfig(5, 5, 2.0),
    surface_inset=2.0,  # start two millimetres under the surface
    min_csv=0,
).validate()

result = compare(mesh, cfg.seed_spec(), cfg)
print("arc csv", result.arc.csv, "straight csv", result.straight.csv, "delta", result.csv_delta)

# brute force on a sparse lattice: score every candidate individually
small = PlannerConfig(**{**cfg.__dict__, "entry_lattice": LatticeConfig(4, 4, 5.0),
                         "exit_lattice": LatticeConfig(4, 4, 5.0),
                         "middle_lattice": LatticeConfig(3, 3, 3.0)}).validate()
prep = prepare(mesh, small.seed_spec(), small)
E, M, X = prep.lattices.entry_points, prep.lattices.middle_points, prep.lattices.exit_points
arcs = [score_channel(arc_through_points(e, m, x), prep.field) for e, m, x in itertools.product(E, M, X)]
lines = [score_channel(straight_through_points(e, x), prep.field) for e, x in itertools.product(E, X)]
print("exhaustive: best arc csv", max(s.csv for s in arcs), "over", len(arcs),
      "| best straight csv", max(s.csv for s in lines), "over", len(lines))
