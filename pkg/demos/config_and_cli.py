"""
Driving the planner from a config file
======================================

The command-line tool reads seeds, lattices and output paths from TOML.
Here the same run is made in-process through ``iafc.cli.run``; from a
shell it is ``iafc plan --config plate.toml``.
"""

import json
import tempfile
from pathlib import Path

from iafc.cli import run

work = Path(tempfile.mkdtemp())

# a phantom written to disk stands in for a segmented bone model
run(["phantom", "c_plate", "--thickness", "8", "--radius", "60", "--sweep", "120",
     "--out", str(work / "plate.stl")])

(work / "plate.toml").write_text("""
mesh = "plate.stl"

[seeds]
entry = [-80.0, 0.0, -35.0]
middle = [0.0, 0.0, -60.0]
exit = [80.0, 0.0, -35.0]

[frame]
origin = [0.0, 0.0, 0.0]
normal = [1.0, 0.0, 0.0]

[lattice.entry]
rows = 5
cols = 5
spacing = 4.0

[lattice.exit]
rows = 5
cols = 5
spacing = 4.0

[lattice.middle]
rows = 3
cols = 3
spacing = 1.0

[output]
report = "report.json"
candidates = "candidates.csv"
""")

# exit status 0: a channel was found; 2: none was viable; 1: bad input
status = run(["compare", "--config", str(work / "plate.toml"), "--deterministic"])
print("exit status", status)

doc = json.loads((work / "report.json").read_text())
print("verdict", doc["verdict"], "csv delta", doc["csv_delta"])
print("arc length %.2f mm, curvature %.5f /mm" % (doc["arc"]["length_mm"], doc["arc"]["curvature_per_mm"]))
print("candidate tables:", sorted(p.name for p in work.glob("candidates*.csv")))
