"""Command-line entry point: ``pgnkd <subcommand> [--config FILE] [--key value ...]``.

Stage outputs live in the configured output directory and are picked up
by the following stages:

    fpv.model, tpv.model   train-classifiers
    teacher.model          train-teacher
    kd.txt                 build-kd
    student.model          distill
    episodes.csv           eval
    summary.txt            report
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .distill import Perception, load_dataset, save_dataset
from .harness.config import ConfigError, ExperimentConfig, load_config, split_overrides
from .harness.generate import RoomSpec, generate_workspace
from .harness.pipeline import distill_stage, eval_stage, kd_stage, teacher_stage, train_classifiers
from .harness.report import episodes_csv, read_episodes_csv, report
from .harness.serialize import ModelFormatError, load_model, save_model
from .oracle import build_cost_field
from .sensing import bev_raster, sense_bev
from .workspace import Pose, WorkspaceFormatError
from .workspace import save as save_workspace

log = logging.getLogger("pgnkd")


def _perception(cfg: ExperimentConfig, out: Path, w) -> Perception:
    return Perception(w, load_model(out / "fpv.model"), load_model(out / "tpv.model"))


def cmd_gen_workspace(args, cfg):
    spec = RoomSpec(args.width_m, args.height_m, args.n_rooms, args.door_width_m, args.n_pillars)
    w = generate_workspace(spec, args.ws_seed, name=Path(args.out).stem)
    save_workspace(w, args.out)
    print(f"wrote {args.out} ({w.width_cells}x{w.height_cells} cells)")


def cmd_train_classifiers(args, cfg):
    w, out = cfg.load_workspace(), _outdir(cfg)
    fpv, tpv = train_classifiers(w, cfg.samples_per_class, cfg.seed)
    save_model(fpv, out / "fpv.model")
    save_model(tpv, out / "tpv.model")
    print(f"classifiers written to {out}")


def cmd_train_teacher(args, cfg):
    w, out = cfg.load_workspace(), _outdir(cfg)
    store = teacher_stage(cfg, w, _perception(cfg, out, w))
    save_model(store, out / "teacher.model")
    print(f"teacher with {len(store)} entries written to {out / 'teacher.model'}")


def cmd_build_kd(args, cfg):
    w, out = cfg.load_workspace(), _outdir(cfg)
    dataset = kd_stage(cfg, w, load_model(out / "teacher.model"), _perception(cfg, out, w))
    save_dataset(dataset, out / "kd.txt")
    print(f"{len(dataset)} merged KD samples written to {out / 'kd.txt'}")


def cmd_distill(args, cfg):
    out = _outdir(cfg)
    student = distill_stage(cfg, load_dataset(out / "kd.txt"))
    save_model(student, out / "student.model")
    print(f"student trained for {student.n_epochs_} epochs, written to {out / 'student.model'}")


def cmd_eval(args, cfg):
    from .student import MlpStudent

    w, out = cfg.load_workspace(), _outdir(cfg)
    models = {}
    if {"nnql", "mlp"} & set(cfg.planners):
        models["perception"] = _perception(cfg, out, w)
    if "nnql" in cfg.planners:
        models["store"] = load_model(out / "teacher.model")
    if "mlp" in cfg.planners:
        models["student"] = MlpStudent.from_model(load_model(out / "student.model"))
    results = [eval_stage(cfg, w, name, **models) for name in cfg.planners]
    (out / "episodes.csv").write_text(episodes_csv(results), encoding="utf-8")
    for r in results:
        print(f"{r.workspace} {r.planner} {100 * r.rate:.2f}%")


def cmd_report(args, cfg):
    out = _outdir(cfg)
    paths = [Path(p) for p in args.csv] or [out / "episodes.csv"]
    results = [r for p in paths for r in read_episodes_csv(p.read_text(encoding="utf-8"))]
    _, summary = report(results, out)
    print(summary, end="")


def cmd_dump_bev(args, cfg):
    w = cfg.load_workspace()
    pose = Pose(args.x, args.y, args.heading)
    print("\n".join(bev_raster(w, pose)))
    d = sense_bev(w, pose)
    print("occupancy " + " ".join(f"{o:.3f}" for o in d.occupancy))


def cmd_dump_costs(args, cfg):
    w, out = cfg.load_workspace(), _outdir(cfg)
    cf = build_cost_field(w, cfg.goal)
    rows = []
    for iy in range(w.height_cells - 1, -1, -1):
        row = []
        for ix in range(w.width_cells):
            c = cf.cost[iy, ix]
            row.append("#" if w.occupancy[iy, ix] else ("inf" if not np.isfinite(c) else f"{c:.2f}"))
        rows.append(" ".join(row))
    path = Path(args.out) if args.out else out / "costs.txt"
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"cost field written to {path}")


def _outdir(cfg: ExperimentConfig) -> Path:
    out = cfg.output_path()
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pgnkd", description="Gridworld teacher-student distillation for point goal navigation.",
        epilog="Any configuration key can be overridden with --key value (e.g. --seed 3 --goal-x 1.5).")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value configuration file")
        p.set_defaults(func=fn)
        return p

    p = add("gen-workspace", cmd_gen_workspace, "generate a rooms-and-doorways .wsp file")
    p.add_argument("--out", required=True)
    p.add_argument("--ws-seed", type=int, default=0)
    p.add_argument("--width-m", type=float, default=10.0)
    p.add_argument("--height-m", type=float, default=5.0)
    p.add_argument("--n-rooms", type=int, default=3)
    p.add_argument("--door-width-m", type=float, default=1.2)
    p.add_argument("--n-pillars", type=int, default=1)
    add("train-classifiers", cmd_train_classifiers, "fit the FPV and TPV place classifiers")
    add("train-teacher", cmd_train_teacher, "train the NNQL teacher")
    add("build-kd", cmd_build_kd, "roll out the teacher and export the KD dataset")
    add("distill", cmd_distill, "train the MLP student on the KD dataset")
    add("eval", cmd_eval, "evaluate the configured planners")
    p = add("report", cmd_report, "per-episode CSV to summary table")
    p.add_argument("--csv", action="append", default=[],
                   help="episode CSV file, repeatable (default: output_dir/episodes.csv)")
    p = add("dump-bev", cmd_dump_bev, "print the 51x51 BEV raster at a pose")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--y", type=float, required=True)
    p.add_argument("--heading", type=float, default=0.0)
    p = add("dump-costs", cmd_dump_costs, "write the oracle cost field as text")
    p.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, split_overrides(rest))
        args.func(args, cfg)
    except (ConfigError, ModelFormatError, WorkspaceFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
