"""Candidate enumeration and three-stage lexicographic selection.

Candidates are ranked by the key (csv, -min_count, mean); remaining ties go
to the lowest (entry, middle, exit) index tuple. Because the key is a total
order, selection is a running maximum: batches are summarised independently
and merged, so the result does not depend on arrival order or worker count.
"""
from __future__ import annotations

import csv as csvmod
import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional

import numpy as np

from .arc_geometry import (COINCIDENT_TOL, Channel, GeometryError, arc_through_points,
                           circle_frames, line_frames, sample_arclengths,
                           straight_through_points)
from .errors import NoViableChannel, PlanningError
from .scoring import BatchScores, ChannelScore, score_batch, score_channel
from .seeding import SeedLattices
from .voxel_field import VoxelDistanceField

MAX_BATCH_SAMPLES = 1_500_000


@dataclass
class CandidateRef:
    entry_index: int
    middle_index: Optional[int]
    exit_index: int
    channel: Channel
    score: Optional[ChannelScore] = None

    @property
    def index(self) -> tuple[int, ...]:
        if self.middle_index is None:
            return (self.entry_index, self.exit_index)
        return (self.entry_index, self.middle_index, self.exit_index)


def selection_key(score: ChannelScore) -> tuple:
    """Higher is better; only meaningful for feasible scores."""
    return (score.csv, -score.min_count, score.mean)


@dataclass
class Selection:
    best: Optional[CandidateRef]
    stage_counts: dict = field(default_factory=dict)


def _check_sets(lattices: SeedLattices, names=("entry", "middle", "exit")):
    for name in names:
        if len(getattr(lattices, f"{name}_points")) == 0:
            raise PlanningError(f"no viable seed points on {name}")


def enumerate_arcs(lattices: SeedLattices, counter: Optional[dict] = None) -> Iterator[CandidateRef]:
    """Every (entry, middle, exit) triple, entry-major; coincident triples are
    skipped and tallied in ``counter['skipped']``."""
    _check_sets(lattices)
    counter = {} if counter is None else counter
    counter.setdefault("skipped", 0)
    E, M, X = lattices.entry_points, lattices.middle_points, lattices.exit_points
    for i, j, k in itertools.product(range(len(E)), range(len(M)), range(len(X))):
        try:
            ch = arc_through_points(E[i], M[j], X[k])
        except GeometryError:
            counter["skipped"] += 1
            continue
        yield CandidateRef(i, j, k, ch)


def enumerate_straights(lattices: SeedLattices, counter: Optional[dict] = None) -> Iterator[CandidateRef]:
    """Every (entry, exit) pair as a straight channel; the middle set is unused."""
    _check_sets(lattices, ("entry", "exit"))
    counter = {} if counter is None else counter
    counter.setdefault("skipped", 0)
    E, X = lattices.entry_points, lattices.exit_points
    produced = 0
    for i, k in itertools.product(range(len(E)), range(len(X))):
        try:
            ch = straight_through_points(E[i], X[k])
        except GeometryError:
            counter["skipped"] += 1
            continue
        produced += 1
        yield CandidateRef(i, None, k, ch)
    if produced == 0:
        raise PlanningError("no straight candidates")


def score_candidates(candidates: Iterable[CandidateRef], field: VoxelDistanceField,
                     step: float = 1.0) -> Iterator[CandidateRef]:
    for c in candidates:
        c.score = score_channel(c.channel, field, step)
        yield c


def select_best(candidates: Iterable[CandidateRef], min_csv: int = 1) -> Selection:
    """Stage 1 max CSV, stage 2 fewest minima, stage 3 max mean, stage 4 lowest index.

    Raises NoViableChannel when no feasible candidate reaches ``min_csv``.
    """
    total = feasible = viable = 0
    best = None
    best_key = None
    n = [0, 0, 0]
    for c in candidates:
        total += 1
        s = c.score
        if not s.feasible:
            continue
        feasible += 1
        if s.csv < min_csv:
            continue
        viable += 1
        key = selection_key(s)
        if best is None:
            best, best_key, n = c, key, [1, 1, 1]
            continue
        n = _bump(n, best_key, key)
        if key > best_key or (key == best_key and c.index < best.index):
            if key != best_key:
                n = _reset(n, best_key, key)
            best, best_key = c, key
    if best is None:
        raise NoViableChannel(f"no viable channel among {total} candidates "
                              f"({feasible} feasible, none with csv >= {min_csv})")
    return Selection(best, {"enumerated": total, "feasible": feasible, "viable": viable,
                            "stage1": n[0], "stage2": n[1], "stage3": n[2], "stage4": 1})


def _bump(n, best_key, key):
    """Count ``key`` toward the stages whose prefix it shares with the current best."""
    n = list(n)
    for depth in range(3):
        if key[: depth + 1] == best_key[: depth + 1]:
            n[depth] += 1
        else:
            break
    return n


def _reset(n, old_key, new_key):
    """New best ``new_key`` (already bumped): stages where prefixes diverge restart at 1."""
    n = list(n)
    for depth in range(3):
        if new_key[: depth + 1] != old_key[: depth + 1]:
            n[depth] = 1
    return n


@dataclass
class _Summary:
    """Running best of a batch, with counts of candidates sharing each key prefix."""

    key: Optional[tuple] = None
    index: Optional[tuple] = None
    n: tuple = (0, 0, 0)
    enumerated: int = 0
    skipped: int = 0
    filtered: int = 0
    feasible: int = 0
    viable: int = 0

    def merge(self, other: "_Summary") -> "_Summary":
        out = _Summary(enumerated=self.enumerated + other.enumerated,
                       skipped=self.skipped + other.skipped,
                       filtered=self.filtered + other.filtered,
                       feasible=self.feasible + other.feasible,
                       viable=self.viable + other.viable)
        if other.key is None:
            out.key, out.index, out.n = self.key, self.index, self.n
            return out
        if self.key is None:
            out.key, out.index, out.n = other.key, other.index, other.n
            return out
        a, b = self, other
        if (b.key, _neg(b.index)) > (a.key, _neg(a.index)):
            a, b = b, a
        counts = []
        for depth in range(3):
            same = a.key[: depth + 1] == b.key[: depth + 1]
            counts.append(a.n[depth] + (b.n[depth] if same else 0))
        out.key, out.index, out.n = a.key, a.index, tuple(counts)
        return out


def _neg(index):
    return tuple(-i for i in index)


def _summarise(scores, viable_mask, index_of: Callable[[int], tuple]) -> _Summary:
    s = _Summary()
    if not viable_mask.any():
        return s
    csv, mc, tot, cnt = scores.csv, scores.min_count, scores.total, scores.counts
    best_csv = csv[viable_mask].max()
    m1 = viable_mask & (csv == best_csv)
    best_mc = mc[m1].min()
    m2 = m1 & (mc == best_mc)
    cand = np.flatnonzero(m2)
    i = cand[np.argmax(tot[cand] / cnt[cand])]
    # exact rational tie test for the mean
    m3 = m2 & (tot * cnt[i] == tot[i] * cnt)
    first = int(np.flatnonzero(m3)[0])
    s.key = (int(best_csv), -int(best_mc), Fraction(int(tot[first]), int(cnt[first])))
    s.index = index_of(first)
    s.n = (int(m1.sum()), int(m2.sum()), int(m3.sum()))
    return s


@dataclass
class SearchOptions:
    step: float = 1.0
    min_csv: int = 1
    workers: int = 1
    min_radius: Optional[float] = None
    max_radius: Optional[float] = None


def _radius_ok(radius, opts: SearchOptions):
    ok = np.ones(radius.shape, dtype=bool)
    if opts.min_radius is not None:
        ok &= radius >= opts.min_radius
    if opts.max_radius is not None:
        ok &= radius <= opts.max_radius
    return ok


def _score_rows(frames, entry, exit, rows, field, step):
    """Score the selected rows of a frame dict in memory-bounded sub-batches."""
    lengths = frames["length"][rows]
    if len(rows) == 0:
        return None
    width = int(np.floor(lengths.max() / step)) + 2
    per = max(1, MAX_BATCH_SAMPLES // width)
    parts = []
    for lo in range(0, len(rows), per):
        r = rows[lo: lo + per]
        s, valid, counts = sample_arclengths(frames["length"][r], step)
        parts.append(score_batch(entry[r], exit[r], frames["tangent"][r], frames["inward"][r],
                                 frames["curvature"][r], s, valid, counts, field))
    if len(parts) == 1:
        return parts[0]
    return BatchScores(vdva=None, valid=None,
                       counts=np.concatenate([p.counts for p in parts]),
                       csv=np.concatenate([p.csv for p in parts]),
                       min_count=np.concatenate([p.min_count for p in parts]),
                       total=np.concatenate([p.total for p in parts]))


def _arc_chunk(i, lattices, field, opts, dump):
    E, M, X = lattices.entry_points, lattices.middle_points, lattices.exit_points
    nm, nx = len(M), len(X)
    a = np.broadcast_to(E[i], (nm * nx, 3))
    b = np.repeat(M, nx, axis=0)
    c = np.tile(X, (nm, 1))
    f = circle_frames(a, b, c)
    ok = f["min_dist"] > COINCIDENT_TOL
    in_range = _radius_ok(f["radius"], opts)
    rows = np.flatnonzero(ok & in_range)
    summary = _Summary(enumerated=int(ok.sum()), skipped=int((~ok).sum()),
                       filtered=int((ok & ~in_range).sum()))
    scores = _score_rows(f, a, c, rows, field, opts.step)
    if scores is None:
        return summary, None
    feasible = scores.feasible
    viable = feasible & (scores.csv >= opts.min_csv)
    summary.feasible = int(feasible.sum())
    summary.viable = int(viable.sum())

    def index_of(r):
        flat = int(rows[r])
        return (i, flat // nx, flat % nx)

    best = _summarise(scores, viable, index_of)
    best.enumerated, best.skipped, best.filtered = summary.enumerated, summary.skipped, summary.filtered
    best.feasible, best.viable = summary.feasible, summary.viable
    table = None
    if dump:
        table = {"entry": np.full(len(rows), i), "mid": rows // nx, "exit": rows % nx,
                 "length": f["length"][rows], "curvature": f["curvature"][rows],
                 "csv": scores.csv, "min_count": scores.min_count,
                 "mean": scores.total / scores.counts, "feasible": feasible}
    return best, table


def _straight_chunk(i, lattices, field, opts, dump):
    E, X = lattices.entry_points, lattices.exit_points
    a = np.broadcast_to(E[i], (len(X), 3))
    f = line_frames(a, X)
    f["inward"] = np.zeros_like(f["tangent"])
    f["curvature"] = np.zeros(len(X))
    ok = f["min_dist"] > COINCIDENT_TOL
    in_range = _radius_ok(np.full(len(X), math.inf), opts)
    rows = np.flatnonzero(ok & in_range)
    summary = _Summary(enumerated=int(ok.sum()), skipped=int((~ok).sum()),
                       filtered=int((ok & ~in_range).sum()))
    scores = _score_rows(f, a, X, rows, field, opts.step)
    if scores is None:
        return summary, None
    feasible = scores.feasible
    viable = feasible & (scores.csv >= opts.min_csv)
    best = _summarise(scores, viable, lambda r: (i, int(rows[r])))
    best.enumerated, best.skipped, best.filtered = summary.enumerated, summary.skipped, summary.filtered
    best.feasible, best.viable = int(feasible.sum()), int(viable.sum())
    table = None
    if dump:
        table = {"entry": np.full(len(rows), i), "mid": np.full(len(rows), -1), "exit": rows,
                 "length": f["length"][rows], "curvature": np.zeros(len(rows)),
                 "csv": scores.csv, "min_count": scores.min_count,
                 "mean": scores.total / scores.counts, "feasible": feasible}
    return best, table


def search(lattices: SeedLattices, field: VoxelDistanceField, mode: str = "arc",
           opts: Optional[SearchOptions] = None, dump: bool = False):
    """Enumerate, score and select over all candidates with vectorised batches.

    Returns (Selection, candidate table or None). The winner is rebuilt as a
    Channel and rescored with the single-channel path, which must agree with
    the batch result bit for bit.
    """
    opts = opts or SearchOptions()
    if mode == "arc":
        _check_sets(lattices)
        chunk = _arc_chunk
    elif mode == "straight":
        _check_sets(lattices, ("entry", "exit"))
        chunk = _straight_chunk
    else:
        raise ValueError(f"unknown mode {mode!r}")
    entries = range(len(lattices.entry_points))

    def work(i):
        return chunk(i, lattices, field, opts, dump)

    if opts.workers > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as pool:
            results = list(pool.map(work, entries))
    else:
        results = [work(i) for i in entries]

    total = _Summary()
    tables = []
    for summary, table in results:
        total = total.merge(summary)
        if table is not None:
            tables.append(table)
    table = None
    if dump and tables:
        table = {k: np.concatenate([t[k] for t in tables]) for k in tables[0]}

    counts = {"enumerated": total.enumerated, "skipped": total.skipped,
              "radius_filtered": total.filtered, "feasible": total.feasible,
              "viable": total.viable}
    if mode == "straight" and total.enumerated == 0:
        raise PlanningError("no straight candidates")
    if total.key is None:
        return Selection(None, counts), table
    counts.update(stage1=total.n[0], stage2=total.n[1], stage3=total.n[2], stage4=1)
    best = _rebuild(lattices, mode, total.index)
    best.score = score_channel(best.channel, field, opts.step)
    if selection_key(best.score) != total.key:
        raise RuntimeError(f"batch and single-channel scores disagree for {total.index}")
    return Selection(best, counts), table


def _rebuild(lattices, mode, index) -> CandidateRef:
    E, M, X = lattices.entry_points, lattices.middle_points, lattices.exit_points
    if mode == "arc":
        i, j, k = index
        return CandidateRef(i, j, k, arc_through_points(E[i], M[j], X[k]))
    i, k = index
    return CandidateRef(i, None, k, straight_through_points(E[i], X[k]))


CANDIDATE_COLUMNS = ("entry_idx", "mid_idx", "exit_idx", "length_mm", "curvature_per_mm",
                     "csv", "min_count", "mean", "feasible")


def write_candidate_table(table, path) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        w = csvmod.writer(fh)
        w.writerow(CANDIDATE_COLUMNS)
        if table is not None:
            for row in zip(table["entry"], table["mid"], table["exit"], table["length"],
                           table["curvature"], table["csv"], table["min_count"],
                           table["mean"], table["feasible"]):
                e, m, x, length, k, csv, mc, mean, feas = row
                w.writerow([int(e), "" if m < 0 else int(m), int(x), repr(float(length)),
                            repr(float(k)), int(csv), int(mc) if feas else "",
                            repr(float(mean)) if feas else "", int(bool(feas))])
    os.replace(tmp, path)
