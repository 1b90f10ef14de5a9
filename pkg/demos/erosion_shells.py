"""
Erosion shells and the safety value of a channel
================================================

A thin slab is peeled one voxel layer at a time. Each voxel keeps the index
of the pass that removed it, so the outer skin is 0 and the core is 2.
A short arc dipping into the core is then scored sample by sample.
"""

import numpy as np

from iafc.arc_geometry import arc_through_points, sample_channel
from iafc.scoring import score_channel
from iafc.voxel_field import VoxelGrid, build_distance_field

# a slab five voxels thick in y, with one empty voxel of margin all round;
# voxel (i, j, k) covers [i, i+1) x [j, j+1) x [k, k+1) mm
occ = np.zeros((24, 7, 11), bool)
occ[1:23, 1:6, 1:10] = True
field = build_distance_field(VoxelGrid((0.5, 0.5, 0.5), 1.0, occ))

# one cross-section, y running down the page; -1 marks empty voxels
print(field.values[:, :, 5].T)

# three points fix the arc: both ends in the outer skin, the apex in the core
channel = arc_through_points((6.28, 1.46, 5.5), (11.0, 3.47, 5.5), (15.72, 1.46, 5.5))
print("radius %.3f mm, length %.3f mm" % (channel.radius, channel.length))

# samples every millimetre along the curve, the last one exactly on the exit
pts = sample_channel(channel, step=1.0)
print(np.round(pts[:, :2], 2))

score = score_channel(channel, field, step=1.0)
print("VDVA", score.vdva.tolist())
print("CSV", score.csv, "reached", score.min_count, "times, mean", score.mean)

# halving the step can only find the same minimum or a lower one
print("CSV at 0.5 mm step:", score_channel(channel, field, step=0.5).csv)
