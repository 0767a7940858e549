"""Command-line entry points.

Subcommands: gen-data, fit, build-train, train, sample, eval, export-obj,
run-all. Exit codes: 0 success, 2 validation error (bad config, bad
arguments, malformed inputs), 3 runtime failure inside a stage.

Goals files carry one goal per line: "x y z fx fz style_id".
Styles files carry change points, one per line: "frame_start style_id".
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .canonical import goal_frame
from .config import PipelineConfig, load_config
from .errors import ConfigError, TerraMotionError
from .fitting import fit_and_refine
from .heightfield import TerrainPatch, extend_edges, load_hgt, save_hgt
from .kinematics import forward_kinematics
from .metrics import evaluate_sequences
from .motion import load_motion, save_motion
from .pipeline import (
    guidance_from_config,
    run_pipeline,
    stage_build_train,
    stage_eval,
    stage_fit,
    stage_gen_data,
    stage_train_from_shard,
)
from .rollout import autoregressive_rollout, style_schedule_from_changes
from .schedule import cosine_schedule
from .skeleton import default_skeleton
from .styles import style_codebook
from .terrain_mesh import heightfield_to_mesh, save_obj

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def read_goals(path):
    goals, styles = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ConfigError(f"goal line needs 6 fields: {line!r}")
            x, y, z, fx, fz = map(float, parts[:5])
            goals.append(goal_frame(x, y, z, fx, fz))
            styles.append(int(parts[5]))
    if not goals:
        raise ConfigError("goals file is empty")
    return goals, styles


def read_styles(path, length):
    changes = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            frame, sid = line.split()
            changes.append((int(frame), int(sid)))
    if not changes:
        raise ConfigError("styles file is empty")
    return style_schedule_from_changes(changes, length)


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "jobs", None) is not None:
        cfg.jobs = args.jobs
    cfg.validate()
    return cfg


def cmd_stage(stage):
    def run(args):
        cfg = _config_from_args(args)
        stage(cfg, Path(args.out))
        return EXIT_OK

    return run


def cmd_run_all(args):
    cfg = _config_from_args(args)
    summary = run_pipeline(cfg, Path(args.out))
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_fit_dirs(args):
    """Standalone fitting: motions + bank directories in, reports out."""
    sk = default_skeleton()
    bank = []
    for i, path in enumerate(sorted(Path(args.bank).glob("*.hgt"))):
        bank.append(TerrainPatch(field=load_hgt(path), source_id=path.stem))
    if not bank:
        raise ConfigError(f"no .hgt patches under {args.bank}")
    motions = sorted(Path(args.motions).glob("*.motion.json"))
    if not motions:
        raise ConfigError(f"no .motion.json files under {args.motions}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "fits.jsonl", "w") as fh:
        for idx, mpath in enumerate(motions):
            segment = load_motion(mpath)
            pos = forward_kinematics(sk, segment)
            results, refined = fit_and_refine(
                sk, segment, pos, bank, top=args.top,
                jump_threshold=args.jump_threshold,
            )
            for rank, (fr, patch) in enumerate(zip(results, refined)):
                name = f"refined_{idx:05d}_{rank}.hgt"
                save_hgt(out / name, patch.field)
                fh.write(json.dumps({
                    "motion": mpath.name, "rank": rank,
                    "patch": fr.source_id,
                    "vertical_offset": fr.vertical_offset,
                    "error_contact": fr.error_contact,
                    "error_penetration": fr.error_penetration,
                    "error_jump": fr.error_jump,
                    "error_total": fr.error_total,
                    "refined_file": name,
                }) + "\n")
    print(f"fit: {len(motions)} motions against {len(bank)} patches -> {out}")
    return EXIT_OK


def cmd_train(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if args.steps:
        cfg.train_steps = args.steps
    cfg.validate()
    data = Path(args.data)
    shard = data / "train.trs1" if data.is_dir() else data
    if not shard.exists():
        raise ConfigError(f"no training shard at {shard}")
    stage_train_from_shard(cfg, shard, Path(args.out))
    return EXIT_OK


def cmd_sample(args):
    from .denoiser import load_checkpoint, numpy_denoiser

    model, _ = load_checkpoint(args.ckpt)
    field = extend_edges(load_hgt(args.terrain), 2.0)
    goals, goal_styles = read_goals(args.goals)
    length = 40 + 30 * args.max_segments
    if args.styles:
        styles = read_styles(args.styles, length)
    else:
        styles = style_schedule_from_changes([(0, goal_styles[0])], length)
    cfg = load_config(args.config) if args.config else PipelineConfig()
    spec = guidance_from_config(cfg) if args.guided else None
    res = autoregressive_rollout(
        numpy_denoiser(model), field, goals, styles,
        cosine_schedule(cfg.diffusion_steps), np.random.default_rng(args.seed),
        start=(args.start[0], args.start[1], args.start[2]),
        guidance=spec, max_segments=args.max_segments,
        codebook=style_codebook(),
    )
    save_motion(args.out, res.motion, default_skeleton())
    print(f"sample: {res.motion.frame_count} frames, "
          f"goals reached {res.goals_reached}/{len(goals)}, "
          f"completed={res.completed} -> {args.out}")
    return EXIT_OK


def cmd_eval(args):
    sk = default_skeleton()
    field = extend_edges(load_hgt(args.terrain), 2.0)
    goals, _ = read_goals(args.goals)
    motions = sorted(Path(args.motions).glob("*.motion.json"))
    if not motions:
        raise ConfigError(f"no .motion.json files under {args.motions}")
    if len(goals) == 1:
        goals = goals * len(motions)
    if len(goals) != len(motions):
        raise ConfigError("goals file must carry one goal (or one per motion)")
    runs = [(load_motion(p), g) for p, g in zip(motions, goals)]
    segments = [m for m, _ in runs]
    lengths = {m.frame_count for m in segments}
    report = evaluate_sequences(
        runs, sk, field,
        diversity_samples=segments if len(lengths) == 1 and len(segments) > 1 else None,
    )
    with open(args.out, "w") as fh:
        for i, row in enumerate(report.sequences):
            row = dict(row, file=motions[i].name)
            fh.write(json.dumps(row) + "\n")
        fh.write(json.dumps(dict(report.row(), aggregate=True)) + "\n")
    print(json.dumps(report.row(), indent=2))
    return EXIT_OK


def cmd_export_obj(args):
    field = load_hgt(args.terrain)
    save_obj(args.out, heightfield_to_mesh(field))
    print(f"export-obj: {args.terrain} -> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="terramotion",
        description="Terrain-adaptive motion synthesis pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def stage_parser(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="pipeline config file (ini)")
        p.add_argument("--out", required=True, help="pipeline output directory")
        p.add_argument("--seed", type=int, help="override config seed")
        p.add_argument("--jobs", type=int, help="worker cap for parallel stages")
        return p

    stage_parser("gen-data", "generate terrain bank and motion clips").set_defaults(
        fn=cmd_stage(stage_gen_data)
    )
    stage_parser("run-fit", "pipeline fitting stage over the output directory").set_defaults(
        fn=cmd_stage(stage_fit)
    )
    stage_parser("build-train", "window, fit-pair, and shard training data").set_defaults(
        fn=cmd_stage(stage_build_train)
    )

    p = sub.add_parser("train", help="train the denoiser on a shard directory")
    p.add_argument("--data", required=True, help="directory containing train.trs1")
    p.add_argument("--steps", type=int, help="training steps (overrides config)")
    p.add_argument("--out", required=True, help="output checkpoint file (.tmck)")
    p.add_argument("--config", help="pipeline config file (ini)")
    p.add_argument("--seed", type=int, help="override config seed")
    p.set_defaults(fn=cmd_train)
    stage_parser("run-eval", "held-out guided/unguided experiment").set_defaults(
        fn=cmd_stage(stage_eval)
    )
    stage_parser("run-all", "full pipeline end to end").set_defaults(fn=cmd_run_all)

    p = sub.add_parser("fit", help="fit motion clips onto terrain patches")
    p.add_argument("--motions", required=True, help="directory of .motion.json files")
    p.add_argument("--bank", required=True, help="directory of .hgt patches")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--top", type=int, default=3)
    p.add_argument("--jump-threshold", type=float, default=0.3, dest="jump_threshold")
    p.set_defaults(fn=cmd_fit_dirs)

    p = sub.add_parser("sample", help="sample a goal-chasing motion")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--terrain", required=True, help="heightfield (.hgt)")
    p.add_argument("--goals", required=True, help="goals file")
    p.add_argument("--styles", help="style change-point file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output motion file")
    p.add_argument("--start", type=float, nargs=3, default=(5.0, 5.0, 0.0),
                   metavar=("X", "Z", "HEADING"))
    p.add_argument("--max-segments", type=int, default=12, dest="max_segments")
    p.add_argument("--guided", action="store_true", help="apply inference guidance")
    p.add_argument("--config", help="config for guidance weights")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("eval", help="evaluate motions against terrain and goals")
    p.add_argument("--motions", required=True)
    p.add_argument("--terrain", required=True)
    p.add_argument("--goals", required=True)
    p.add_argument("--out", required=True, help="line-delimited report file")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("export-obj", help="export a heightfield as a watertight OBJ")
    p.add_argument("--terrain", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export_obj)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except TerraMotionError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
