"""Command-line front end.

Exit status: 0 on success, 2 when the run finds no viable channel, 1 on
errors (bad config, unreadable mesh, empty seed sets).
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .arc_geometry import sample_channel, tube_mesh, write_polyline_ply
from .config import MODES, PlannerConfig, load_config
from .errors import ConfigError, PlanningError
from .mesh_io import MeshError, load_mesh, save_stl
from .phantoms import PHANTOMS, generate_phantom
from .planner import ComparisonReport, prepare, run_mode, write_json
from .selection import write_candidate_table
from .voxel_field import build_distance_field, voxelize, write_field_dump

log = logging.getLogger("iafc")

EXIT_OK, EXIT_ERROR, EXIT_NO_CHANNEL = 0, 1, 2


def _apply_overrides(cfg: PlannerConfig, args) -> PlannerConfig:
    for name in ("mesh", "pitch", "step", "min_csv", "connectivity", "workers", "report",
                 "polyline", "tube", "candidates", "surface_inset"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    return cfg.validate()


def _load_planner_config(args) -> PlannerConfig:
    cfg = load_config(args.config)
    cfg = _apply_overrides(cfg, args)
    if not cfg.mesh:
        raise ConfigError("no mesh given (set 'mesh' in the config or pass --mesh)")
    return cfg


def _emit_channel_files(cfg: PlannerConfig, report, suffix: str = "") -> None:
    if not report.feasible:
        return
    pts = sample_channel(report.channel, cfg.step)
    if cfg.polyline:
        write_polyline_ply(pts, _suffixed(cfg.polyline, suffix))
    if cfg.tube:
        save_stl(tube_mesh(pts, cfg.tube_radius), _suffixed(cfg.tube, suffix))


def _suffixed(path: str, suffix: str) -> str:
    if not suffix:
        return path
    stem, dot, ext = path.rpartition(".")
    return f"{stem}_{suffix}.{ext}" if dot else f"{path}_{suffix}"


def cmd_plan(args) -> int:
    cfg = _load_planner_config(args)
    if cfg.mode == "compare":
        return cmd_compare(args, cfg)
    mesh = load_mesh(cfg.mesh)
    prep = prepare(mesh, cfg.seed_spec(), cfg)
    report, table = run_mode(prep, cfg, cfg.mode, dump=bool(cfg.candidates))
    doc = report.to_dict(deterministic=args.deterministic)
    _write_report(doc, cfg.report)
    if cfg.candidates:
        write_candidate_table(table, cfg.candidates)
    _emit_channel_files(cfg, report)
    if cfg.field_dump:
        write_field_dump(prep.field, cfg.field_dump)
    _summarise(report)
    return EXIT_OK if report.feasible else EXIT_NO_CHANNEL


def cmd_compare(args, cfg: PlannerConfig | None = None) -> int:
    cfg = cfg or _load_planner_config(args)
    mesh = load_mesh(cfg.mesh)
    prep = prepare(mesh, cfg.seed_spec(), cfg)
    arc, arc_table = run_mode(prep, cfg, "arc", dump=bool(cfg.candidates))
    straight, straight_table = run_mode(prep, cfg, "straight", dump=bool(cfg.candidates))
    cmp = ComparisonReport(arc, straight)
    _write_report(cmp.to_dict(deterministic=args.deterministic), cfg.report)
    if cfg.candidates:
        write_candidate_table(arc_table, _suffixed(cfg.candidates, "arc"))
        write_candidate_table(straight_table, _suffixed(cfg.candidates, "straight"))
    _emit_channel_files(cfg, arc, "arc")
    _emit_channel_files(cfg, straight, "straight")
    _summarise(arc)
    _summarise(straight)
    if cmp.csv_delta is not None:
        print(f"csv_delta (arc - straight): {cmp.csv_delta}")
    return EXIT_OK if (arc.feasible or straight.feasible) else EXIT_NO_CHANNEL


def _write_report(doc: dict, path) -> None:
    if path:
        write_json(doc, path)
        log.info("report written to %s", path)


def _summarise(report) -> None:
    if report.feasible:
        ch = report.channel
        print(f"{report.mode}: csv={report.csv} length={ch.length:.2f} mm "
              f"curvature={ch.curvature:.5f} /mm min_count={report.score.min_count}")
    else:
        print(f"{report.mode}: no viable channel ({report.infeasibility})")


def cmd_voxelize(args) -> int:
    if args.pitch is not None and not args.pitch > 0:
        raise ConfigError(f"pitch must be positive, got {args.pitch}")
    mesh = load_mesh(args.mesh)
    grid = voxelize(mesh, args.pitch or 1.0)
    fld = build_distance_field(grid, args.connectivity or 6)
    write_field_dump(fld, args.out)
    print(f"dims={grid.dims} occupied={int(grid.occupancy.sum())} max_depth={fld.max_depth}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    mesh = load_mesh(args.mesh)
    lo, hi = mesh.bounds
    print(f"vertices: {len(mesh.vertices)}")
    print(f"triangles: {len(mesh.triangles)}")
    print(f"bounds: {np.round(lo, 3).tolist()} .. {np.round(hi, 3).tolist()} mm")
    if args.pitch:
        grid = voxelize(mesh, args.pitch)
        fld = build_distance_field(grid, args.connectivity or 6)
        occ = int(grid.occupancy.sum())
        print(f"grid: dims={list(grid.dims)} pitch={grid.pitch} occupied={occ} "
              f"volume={occ * grid.pitch ** 3:.1f} mm^3")
        depths = np.bincount(fld.values[grid.occupancy].astype(np.int64))
        print(f"max erosion depth: {fld.max_depth}")
        print("voxels per depth: " + " ".join(f"{d}:{n}" for d, n in enumerate(depths)))
    return EXIT_OK


def cmd_phantom(args) -> int:
    params = {}
    if args.name == "cuboid":
        if args.size:
            params["size"] = tuple(args.size)
    else:
        for key in ("radius", "segments"):
            if getattr(args, key) is not None:
                params[key] = getattr(args, key)
        if args.sweep is not None:
            params["sweep_deg"] = args.sweep
        if args.name == "c_plate":
            for key in ("thickness", "width"):
                if getattr(args, key) is not None:
                    params[key] = getattr(args, key)
        elif args.tube_radius is not None:
            params["tube_radius"] = args.tube_radius
    try:
        mesh = generate_phantom(args.name, **params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"phantom {args.name}: {exc}") from None
    save_stl(mesh, args.out, binary=not args.ascii)
    print(f"{args.name}: {len(mesh.triangles)} triangles -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iafc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def planner_args(sp):
        sp.add_argument("--config", required=True, help="TOML planner config")
        sp.add_argument("--mesh", help="override the mesh path")
        sp.add_argument("--pitch", type=float)
        sp.add_argument("--step", type=float)
        sp.add_argument("--min-csv", dest="min_csv", type=int)
        sp.add_argument("--connectivity", type=int, choices=(6, 26))
        sp.add_argument("--surface-inset", dest="surface_inset", type=float)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--report", help="JSON report path")
        sp.add_argument("--polyline", help="PLY polyline of the selected channel")
        sp.add_argument("--tube", help="STL tube around the selected channel")
        sp.add_argument("--candidates", help="CSV dump of every scored candidate")
        sp.add_argument("--deterministic", action="store_true", help="omit timing from reports")

    sp = sub.add_parser("plan", help="plan one channel")
    planner_args(sp)
    sp.add_argument("--mode", choices=MODES)
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("compare", help="plan arc and straight channels on one distance field")
    planner_args(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("voxelize", help="write the erosion-depth field as a binary dump")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--pitch", type=float)
    sp.add_argument("--connectivity", type=int, choices=(6, 26))
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_voxelize)

    sp = sub.add_parser("inspect", help="print mesh and grid statistics")
    sp.add_argument("--mesh", required=True)
    sp.add_argument("--pitch", type=float, default=1.0)
    sp.add_argument("--connectivity", type=int, choices=(6, 26))
    sp.set_defaults(func=cmd_inspect)

    sp = sub.add_parser("phantom", help="write a synthetic test solid")
    sp.add_argument("name", choices=sorted(PHANTOMS))
    sp.add_argument("--out", required=True)
    sp.add_argument("--size", type=float, nargs=3, metavar=("X", "Y", "Z"))
    sp.add_argument("--thickness", type=float)
    sp.add_argument("--radius", type=float)
    sp.add_argument("--sweep", type=float, help="degrees")
    sp.add_argument("--width", type=float)
    sp.add_argument("--tube-radius", dest="tube_radius", type=float)
    sp.add_argument("--segments", type=int)
    sp.add_argument("--ascii", action="store_true")
    sp.set_defaults(func=cmd_phantom)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, MeshError, PlanningError, OSError, ValueError) as exc:
        print(f"iafc: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main() -> None:
    sys.exit(run())
