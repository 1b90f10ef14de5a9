"""Channel safety scoring against the erosion-depth field.

The VDVA of a channel is the list of distance values at its equally spaced
samples; the CSV is its minimum. A channel with any sample outside the bone
is infeasible and scores OUTSIDE.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .arc_geometry import Channel, curve_coordinate, curve_offsets, sample_channel
from .voxel_field import OUTSIDE, VoxelDistanceField


@dataclass(frozen=True, eq=False)
class ChannelScore:
    vdva: np.ndarray
    csv: int
    min_count: int
    mean: Optional[Fraction]
    feasible: bool

    @classmethod
    def from_vdva(cls, vdva) -> "ChannelScore":
        vdva = np.asarray(vdva, dtype=np.int64)
        if len(vdva) == 0:
            raise ValueError("empty VDVA")
        if np.any(vdva == OUTSIDE):
            return cls(vdva, OUTSIDE, 0, None, False)
        csv = int(vdva.min())
        return cls(vdva, csv, int(np.count_nonzero(vdva == csv)),
                   Fraction(int(vdva.sum()), len(vdva)), True)

    def __eq__(self, other):
        if not isinstance(other, ChannelScore):
            return NotImplemented
        return (np.array_equal(self.vdva, other.vdva) and self.csv == other.csv
                and self.min_count == other.min_count and self.mean == other.mean
                and self.feasible == other.feasible)

    def to_dict(self) -> dict:
        return {
            "vdva": self.vdva.tolist(),
            "csv": self.csv,
            "min_count": self.min_count,
            "mean": None if self.mean is None else float(self.mean),
            "mean_fraction": None if self.mean is None else [self.mean.numerator, self.mean.denominator],
            "feasible": self.feasible,
        }


def score_channel(channel: Channel, field: VoxelDistanceField, step: float = 1.0) -> ChannelScore:
    return ChannelScore.from_vdva(field.lookup(sample_channel(channel, step)))


def score_points(points, field: VoxelDistanceField) -> ChannelScore:
    """Score an explicit sample sequence (used for hand-built channels)."""
    return ChannelScore.from_vdva(field.lookup(np.asarray(points, dtype=np.float64).reshape(-1, 3)))


@dataclass
class BatchScores:
    """Per-row statistics for a batch of channels; padded columns are ignored."""

    vdva: np.ndarray  # (B, S), padding holds a large value
    valid: np.ndarray  # (B, S)
    counts: np.ndarray  # samples per row
    csv: np.ndarray
    min_count: np.ndarray
    total: np.ndarray  # sum of vdva over valid samples

    @property
    def feasible(self) -> np.ndarray:
        return self.csv != OUTSIDE

    def row(self, i: int) -> ChannelScore:
        return ChannelScore.from_vdva(self.vdva[i, : self.counts[i]])


_PAD = np.iinfo(np.int16).max


def score_batch(entry, exit, tangent, inward, curvature, s, valid, counts,
                field: VoxelDistanceField) -> BatchScores:
    """Sample and score B channels at once. ``s``/``valid``/``counts`` come from
    :func:`iafc.arc_geometry.sample_arclengths`."""
    along, across = curve_offsets(curvature, s)
    coords = [curve_coordinate(entry, tangent, inward, along, across, a) for a in range(3)]
    del along, across
    vdva = field.lookup_coords(*coords)
    del coords
    rows = np.arange(len(counts))
    vdva[rows, counts - 1] = field.lookup(exit)
    vdva = np.where(valid, vdva, _PAD)
    csv = vdva.min(axis=1).astype(np.int64)
    min_count = np.count_nonzero(vdva == csv[:, None], axis=1)
    total = np.where(valid, vdva, 0).sum(axis=1, dtype=np.int64)
    return BatchScores(vdva, valid, counts, csv, min_count, total)
