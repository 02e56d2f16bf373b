"""Command line entry point: ``spot <command> [options]``.

Commands
--------
build-ref  trajectory + points (+ ground truth) -> reference database
match      stream a query run against a reference database
eval       PR curves, MR100 and AUC for a match CSV
synth      write a synthetic corridor traversal in the on-disk formats
sweep-w    evaluate one query run for several sequence lengths (common query set)

Exit codes: 0 success, 2 configuration error, 3 I/O or format error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as spot_io
from .config import ConfigError, PipelineConfig, dump_config, load_config
from .pipeline import build_reference, describe_sequence, evaluate, format_summary, run_queries, sweep_w
from .synthworld import FORWARD, REVERSE, TraversalSpec, WorldSpec, generate_traversal, generate_world
from .synthworld import render_traversal, true_poses

log = logging.getLogger("spot")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


class _Outputs:
    """Remembers written files so a failed command can remove them."""

    def __init__(self):
        self.paths: list[Path] = []

    def __call__(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.paths.append(path)
        return path

    def cleanup(self):
        for p in self.paths:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _load_sequence(args, cfg: PipelineConfig):
    poses = spot_io.parse_trajectory(args.trajectory, cfg.stationary_eps)
    frames = spot_io.parse_points(args.points)
    gt = spot_io.parse_ground_truth(args.ground_truth) if args.ground_truth else None
    if gt is not None and poses and poses[-1].frame_id >= len(gt):
        raise spot_io.FormatError(f"{args.ground_truth}: no entry for frame_id {poses[-1].frame_id}")
    return describe_sequence(poses, frames, cfg, gt)


def _check_db(db: spot_io.ReferenceDatabase, cfg: PipelineConfig):
    ours = (cfg.m, cfg.n, np.float32(cfg.r_lo), np.float32(cfg.r_la), np.float32(cfg.h_c))
    theirs = (db.m, db.n, np.float32(db.r_lo), np.float32(db.r_la), np.float32(db.h_c))
    if ours != theirs:
        raise ConfigError(f"reference database was built with (m, n, r_lo, r_la, h_c)={theirs}, config has {ours}")
    if len(db) == 0:
        raise ConfigError("reference database is empty")


def cmd_build_ref(args, cfg, out: _Outputs):
    seq = _load_sequence(args, cfg)
    db = build_reference(seq, cfg)
    spot_io.write_reference_db(out(args.out), db)
    log.info("wrote %d references to %s", len(db), args.out)


def _query_matches(args, cfg, db):
    seq = _load_sequence(args, cfg)
    matches, runner = run_queries(db.grids, seq.descriptors, cfg)
    return seq, matches, runner


def cmd_match(args, cfg, out: _Outputs):
    db = spot_io.parse_reference_db(args.ref_db)
    _check_db(db, cfg)
    seq, matches, runner = _query_matches(args, cfg, db)
    out_dir = Path(args.out_dir)
    spot_io.write_matches(out(out_dir / "matches.csv"), matches)
    if seq.positions is not None:
        spot_io.write_ground_truth(out(out_dir / "query_gt.csv"), seq.ground_truth())
    with open(out(out_dir / "timing.txt"), "w") as fh:
        fh.write(f"queries={len(seq)}\nreferences={len(db)}\n")
        fh.write(f"describe_ms_mean={1e3 * float(np.mean(seq.describe_seconds or [0.0])):.4f}\n")
        fh.write(f"match_ms_mean={1e3 * float(np.mean(runner.match_seconds or [0.0])):.4f}\n")
    (out(out_dir / "config.txt")).write_text(dump_config(cfg))
    log.info("%d queries, %d matches", len(seq), len(matches))


def _eval_to(out_dir: Path, matches, query_gt, ref_gt, cfg, out: _Outputs) -> str:
    report = evaluate(matches, query_gt, ref_gt, cfg.r_m)
    for r_m, (curve, _, _) in report.items():
        spot_io.write_pr_csv(out(out_dir / f"pr_{r_m:g}.csv"), curve)
    summary = format_summary(report)
    out(out_dir / "summary.txt").write_text(summary)
    return summary


class _Row:
    def __init__(self, d):
        self.query_index = d["query_idx"]
        self.ref_index = d["ref_idx"]
        self.score = d["score"]


def cmd_eval(args, cfg, out: _Outputs):
    db = spot_io.parse_reference_db(args.ref_db)
    if not db.gt_flags.all():
        raise ConfigError("reference database lacks ground truth for some records")
    query_gt = spot_io.parse_ground_truth(args.query_gt)
    rows = [_Row(r) for r in spot_io.parse_matches(args.matches)]
    for r in rows:
        if not (0 <= r.ref_index < len(db)) or not (0 <= r.query_index < len(query_gt)):
            raise spot_io.FormatError(f"{args.matches}: match ({r.query_index}, {r.ref_index}) out of range")
    sys.stdout.write(_eval_to(Path(args.out_dir), rows, query_gt, db.ground_truth(), cfg, out))


def cmd_sweep_w(args, cfg, out: _Outputs):
    if cfg.matcher not in ("DD", "SM"):
        raise ConfigError("sweep-w needs a sequence matcher (DD or SM)")
    ws = [int(w) for w in args.w_list.split(",") if w.strip()]
    if not ws:
        raise ConfigError("--w-list is empty")
    for w in ws:
        try:
            cfg.replace(w=w).matching_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    db = spot_io.parse_reference_db(args.ref_db)
    _check_db(db, cfg)
    # distance columns do not depend on w; stream them once, then replay per w
    seq, _, runner = _query_matches(args, cfg.replace(matcher="NN"), db)
    if seq.positions is None:
        raise ConfigError("sweep-w needs --ground-truth")
    blocks = []
    reports = sweep_w(runner.D, seq.ground_truth(), db.ground_truth(), cfg, ws)
    for w, report in reports.items():
        w_dir = Path(args.out_dir) / f"w_{w}"
        for r_m, (curve, _, _) in report.items():
            spot_io.write_pr_csv(out(w_dir / f"pr_{r_m:g}.csv"), curve)
        summary = format_summary(report)
        out(w_dir / "summary.txt").write_text(summary)
        blocks.append(f"[w={w}]\n{summary}")
    text = "\n".join(blocks)
    out(Path(args.out_dir) / "sweep.txt").write_text(text)
    sys.stdout.write(text)


def cmd_synth(args, cfg, out: _Outputs):
    world = generate_world(WorldSpec(seed=args.world_seed, length=args.length, density=args.density))
    spec = TraversalSpec(
        direction=args.direction,
        lateral_offset=args.lateral_offset,
        frame_step=args.frame_step,
        fov_deg=args.fov,
        dropout=args.dropout,
        pose_noise_std=args.noise,
        seed=args.seed,
        camera_height=cfg.h_c if cfg.h_c is not None else 1.6,
    )
    poses, gt = generate_traversal(world, spec, args.length)
    frames = render_traversal(world, true_poses(poses, gt, spec.camera_height), spec, cfg.r_d)
    out_dir = Path(args.out_dir)
    spot_io.write_trajectory(out(out_dir / f"{args.prefix}trajectory.csv"), poses)
    spot_io.write_points(out(out_dir / f"{args.prefix}points.bin"), frames)
    spot_io.write_ground_truth(out(out_dir / f"{args.prefix}ground_truth.csv"), gt)
    log.info("wrote %d frames to %s", len(poses), out_dir)


def _sequence_args(p, gt_required=False):
    p.add_argument("--trajectory", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--ground-truth", required=gt_required, default=None)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="key = value parameter file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
    common.add_argument("--print-config", action="store_true", help="print effective config and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="spot", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-ref", parents=[common])
    _sequence_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_ref)

    p = sub.add_parser("match", parents=[common])
    _sequence_args(p)
    p.add_argument("--ref-db", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", parents=[common])
    p.add_argument("--matches", required=True)
    p.add_argument("--ref-db", required=True)
    p.add_argument("--query-gt", required=True, help="ground truth per query keyframe (from match)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval, needs_h_c=False)

    p = sub.add_parser("synth", parents=[common])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--prefix", default="")
    p.add_argument("--length", type=float, default=1000.0)
    p.add_argument("--world-seed", type=int, default=0)
    p.add_argument("--density", type=float, default=WorldSpec.density, help="objects per 100 m")
    p.add_argument("--direction", choices=(FORWARD, REVERSE), default=FORWARD)
    p.add_argument("--lateral-offset", type=float, default=0.0)
    p.add_argument("--frame-step", type=float, default=0.7)
    p.add_argument("--fov", type=float, default=90.0)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0, help="pose random-walk std per frame (m)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth, needs_h_c=False)

    p = sub.add_parser("sweep-w", parents=[common])
    _sequence_args(p, gt_required=True)
    p.add_argument("--ref-db", required=True)
    p.add_argument("--w-list", required=True, help="comma-separated odd sequence lengths")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep_w)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    out = _Outputs()
    try:
        cfg = load_config(args.config, args.set, validate=False)
        if getattr(args, "needs_h_c", True) or cfg.h_c is not None:
            cfg.validate()
        if args.print_config:
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        args.func(args, cfg, out)
        return EXIT_OK
    except ConfigError as exc:
        out.cleanup()
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, spot_io.FormatError) as exc:
        out.cleanup()
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BaseException:
        out.cleanup()
        raise


if __name__ == "__main__":
    sys.exit(main())
