"""End-to-end pipeline stages.

Every stage reads its inputs from the output directory and writes its
artifacts back there, so stages are individually invocable and
deterministic given the config seed: gen-data -> fit -> build-train ->
train -> eval. `run_pipeline` chains them and returns the final report.

The eval stage is a paired experiment: each held-out (terrain, goal)
pair is rolled out twice with identical random streams, once without
guidance and once with the configured guidance, so the two arms differ
only by the guidance update.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .canonical import GoalFrame, goal_frame
from .config import PipelineConfig, save_config
from .datagen import ClipRecord, generate_clip
from .dataset import (
    ClipFit,
    build_training_set,
    load_shard,
    pack_samples,
    save_shard,
)
from .denoiser import (
    DenoiserConfig,
    TransformerDenoiser,
    load_checkpoint,
    numpy_denoiser,
    save_checkpoint,
)
from .fitting import FitResult, fit_and_refine
from .guidance import GuidanceSpec, no_guidance
from .heightfield import (
    HeightField,
    TerrainPatch,
    extend_edges,
    height_at,
    load_hgt,
    save_hgt,
)
from .kinematics import forward_kinematics
from .metrics import (
    contact_distance_metric,
    diversity,
    foot_skate,
    goal_error,
    penetration_metric,
)
from .motion import load_motion, save_motion
from .rollout import autoregressive_rollout, style_schedule_from_changes
from .schedule import cosine_schedule
from .skeleton import default_skeleton
from .styles import STYLES, style_codebook
from .terrain_gen import PatchBankParams, generate_patch_bank, generate_terrain
from .training import TrainConfig, train_denoiser

REPORT_COLUMNS = (
    "penetration_cm", "contact_dist_cm", "goal_pos_cm",
    "goal_rot_rad", "foot_skate_cm", "diversity",
)

_EVAL_KINDS = (
    ("fractal", {"amplitude": 0.22}),
    ("slope", {"angle_deg": 10.0}),
    ("stairs", {"rise": 0.15, "run": 0.34}),
    ("flat", {}),
)


def _ensure(path: Path) -> Path:
    path.mkdir(parents=True, exist_ok=True)
    return path


def stage_gen_data(cfg: PipelineConfig, out: Path, log=print) -> None:
    """Terrain bank + procedural clips, all derived from cfg.seed."""
    cfg.validate()
    out = _ensure(Path(out))
    save_config(out / "config.ini", cfg)

    bank_dir = _ensure(out / "bank")
    params = PatchBankParams(
        count=cfg.patch_count, cell_size=cfg.cell_size, source_size=cfg.source_size
    )
    bank = generate_patch_bank(cfg.seed + 1000, params)
    with open(bank_dir / "bank.jsonl", "w") as fh:
        for i, patch in enumerate(bank):
            save_hgt(bank_dir / f"patch_{i:05d}.hgt", patch.field)
            fh.write(json.dumps(
                {"index": i, "source_id": patch.source_id, "yaw": patch.yaw}
            ) + "\n")
    log(f"gen-data: wrote {len(bank)} patches")

    clip_dir = _ensure(out / "clips")
    rng = np.random.default_rng(cfg.seed + 2000)
    n_fields = max(6, cfg.clip_count // 12)
    fields = []
    kinds = [("flat", {}), ("slope", {}), ("fractal", {}), ("stairs", {})]
    for i in range(n_fields):
        kind, kw = kinds[i % len(kinds)]
        if kind == "slope":
            kw = {"angle_deg": float(rng.uniform(4.0, 18.0)),
                  "direction": float(rng.uniform(0, 2 * math.pi))}
        elif kind == "fractal":
            kw = {"amplitude": float(rng.uniform(0.08, 0.3)),
                  "octaves": int(rng.integers(3, 6))}
        elif kind == "stairs":
            kw = {"rise": float(rng.uniform(0.1, 0.2)),
                  "run": float(rng.uniform(0.28, 0.4)),
                  "direction": float(rng.uniform(0, 2 * math.pi))}
        fields.append(generate_terrain(cfg.seed + 2100 + i, kind,
                                       size=cfg.source_size,
                                       cell_size=cfg.cell_size, **kw))

    sk = default_skeleton()
    margin = 2.3
    with open(clip_dir / "clips.jsonl", "w") as fh:
        for i in range(cfg.clip_count):
            style = cfg.styles[i % len(cfg.styles)]
            field = fields[i % n_fields]
            lo, hi = margin, cfg.source_size - margin
            start = (float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi)))
            heading = float(rng.uniform(0, 2 * math.pi))
            rec = generate_clip(
                cfg.seed + 3000 + i, style, field, start, heading,
                n_frames=cfg.clip_frames, fps=cfg.fps, skeleton=sk,
            )
            name = f"clip_{i:05d}.motion.json"
            save_motion(clip_dir / name, rec.segment, sk)
            fh.write(json.dumps(
                {"index": i, "file": name, "style": style,
                 "style_id": rec.style_id, "is_jump": rec.is_jump}
            ) + "\n")
    log(f"gen-data: wrote {cfg.clip_count} clips")


def load_bank(out: Path) -> list[TerrainPatch]:
    bank_dir = Path(out) / "bank"
    patches = []
    with open(bank_dir / "bank.jsonl") as fh:
        for line in fh:
            meta = json.loads(line)
            field = load_hgt(bank_dir / f"patch_{meta['index']:05d}.hgt")
            patches.append(TerrainPatch(field=field, source_id=meta["source_id"],
                                        yaw=meta["yaw"]))
    return patches


def load_clips(out: Path) -> list[ClipRecord]:
    clip_dir = Path(out) / "clips"
    clips = []
    with open(clip_dir / "clips.jsonl") as fh:
        for line in fh:
            meta = json.loads(line)
            seg = load_motion(clip_dir / meta["file"])
            clips.append(ClipRecord(
                segment=seg, style_name=meta["style"],
                style_id=meta["style_id"], is_jump=meta["is_jump"],
                seed=0,
            ))
    return clips


def stage_fit(cfg: PipelineConfig, out: Path, log=print) -> None:
    """Fit every clip to the bank and refine its top terrain patches."""
    out = Path(out)
    bank = load_bank(out)
    clips = load_clips(out)
    sk = default_skeleton()
    fit_dir = _ensure(out / "fits")

    def fit_one(item):
        index, clip = item
        pos = forward_kinematics(sk, clip.segment)
        results, refined = fit_and_refine(
            sk, clip.segment, pos, bank, top=cfg.top_k,
            jump_threshold=cfg.jump_threshold, is_jump=clip.is_jump,
        )
        return index, results, refined

    t0 = time.time()
    if cfg.jobs > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            fitted = list(pool.map(fit_one, enumerate(clips)))
    else:
        fitted = [fit_one(item) for item in enumerate(clips)]

    with open(fit_dir / "fits.jsonl", "w") as fh:
        for index, results, refined in fitted:
            for rank, (fr, patch) in enumerate(zip(results, refined)):
                name = f"refined_{index:05d}_{rank}.hgt"
                save_hgt(fit_dir / name, patch.field)
                fh.write(json.dumps({
                    "clip": index, "rank": rank, "patch_id": fr.patch_id,
                    "source_id": fr.source_id,
                    "vertical_offset": fr.vertical_offset,
                    "error_contact": fr.error_contact,
                    "error_penetration": fr.error_penetration,
                    "error_jump": fr.error_jump,
                    "error_total": fr.error_total,
                    "refined_file": name,
                }) + "\n")
    log(f"fit: {len(clips)} clips x {len(bank)} patches in {time.time() - t0:.1f}s")


def load_fits(out: Path) -> list[ClipFit]:
    fit_dir = Path(out) / "fits"
    rows: dict[int, list] = {}
    with open(fit_dir / "fits.jsonl") as fh:
        for line in fh:
            meta = json.loads(line)
            rows.setdefault(meta["clip"], []).append(meta)
    fits = []
    for clip_index in sorted(rows):
        results, refined = [], []
        for meta in sorted(rows[clip_index], key=lambda m: m["rank"]):
            results.append(FitResult(
                patch_id=meta["patch_id"], source_id=meta["source_id"],
                vertical_offset=meta["vertical_offset"],
                error_contact=meta["error_contact"],
                error_penetration=meta["error_penetration"],
                error_jump=meta["error_jump"],
            ))
            field = load_hgt(fit_dir / meta["refined_file"])
            refined.append(TerrainPatch(field=field, source_id=meta["source_id"]))
        fits.append(ClipFit(clip_index=clip_index, results=results, refined=refined))
    return fits


def stage_build_train(cfg: PipelineConfig, out: Path, log=print) -> None:
    out = Path(out)
    clips = load_clips(out)
    fits = load_fits(out)
    samples = build_training_set(clips, fits, mirror=True)
    shard_dir = _ensure(out / "shards")
    save_shard(shard_dir / "train.trs1", samples)
    log(f"build-train: {len(samples)} samples")


def stage_train_from_shard(cfg: PipelineConfig, shard, ckpt, log=print) -> None:
    import torch

    samples = load_shard(shard)
    packed = pack_samples(samples, style_codebook())
    torch.manual_seed(cfg.seed)  # parameter init draws from the global rng
    model = TransformerDenoiser(DenoiserConfig(
        frames=cfg.frames, seed_frames=cfg.seed_frames,
        width=cfg.width, layers=cfg.layers, heads=cfg.heads,
        ff_width=cfg.ff_width, diffusion_steps=cfg.diffusion_steps,
    ))
    log(f"train: {model.parameter_count()} parameters, "
        f"{len(samples)} samples, {cfg.train_steps} steps")
    schedule = cosine_schedule(cfg.diffusion_steps)
    history = train_denoiser(
        model, packed, schedule,
        TrainConfig(
            steps=cfg.train_steps, batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            position_weight=cfg.lambda_pos, seed=cfg.seed,
        ),
        log=log,
    )
    save_checkpoint(ckpt, model,
                    extra={"final_loss": history[-1][1] if history else None})


def stage_train(cfg: PipelineConfig, out: Path, log=print) -> None:
    out = Path(out)
    stage_train_from_shard(cfg, out / "shards" / "train.trs1", out / "model.tmck", log)


def guidance_from_config(cfg: PipelineConfig) -> GuidanceSpec:
    return GuidanceSpec(
        phys=cfg.guide_phys, smooth=cfg.guide_smooth,
        collision=cfg.guide_collision, mode=cfg.guide_mode,
    )


def eval_terrains(cfg: PipelineConfig, count: int = 6) -> list[HeightField]:
    """Held-out terrains: fresh seeds, larger extent, padded edges."""
    fields = []
    rng = np.random.default_rng(cfg.seed + 9000)
    for i in range(count):
        kind, kw = _EVAL_KINDS[i % len(_EVAL_KINDS)]
        kw = dict(kw)
        if kind in ("slope", "stairs"):
            kw["direction"] = float(rng.uniform(0, 2 * math.pi))
        field = generate_terrain(cfg.seed + 9100 + i, kind, size=10.0,
                                 cell_size=cfg.cell_size, **kw)
        fields.append(extend_edges(field, 2.0))
    return fields


def eval_pairs(cfg: PipelineConfig, fields: list[HeightField]):
    """(field_index, start(x, z, heading), goal) tuples for the experiment."""
    rng = np.random.default_rng(cfg.seed + 9500)
    pairs = []
    for p in range(cfg.eval_pairs):
        fi = p % len(fields)
        field = fields[fi]
        cx = cz = 5.0  # un-padded eval fields span [0, 10]
        jitter = rng.uniform(-1.0, 1.0, size=2)
        start_xz = np.array([cx + jitter[0], cz + jitter[1]])
        bearing = float(rng.uniform(0, 2 * math.pi))
        dist = float(rng.uniform(cfg.goal_min_dist, cfg.goal_max_dist))
        direction = np.array([math.sin(bearing), math.cos(bearing)])
        goal_xz = start_xz + direction * dist
        gy = float(height_at(field, goal_xz[0], goal_xz[1])) + STYLES["walk"].root_height
        goal = goal_frame(goal_xz[0], gy, goal_xz[1], direction[0], direction[1])
        pairs.append((fi, (float(start_xz[0]), float(start_xz[1]), bearing), goal))
    return pairs


def _run_metrics(motion, goal, field, sk):
    pen = penetration_metric(motion, sk, field)
    cdist, _ = contact_distance_metric(motion, sk, field)
    gpos, grot = goal_error(motion, goal)
    skate = foot_skate(motion, sk)
    return {
        "penetration_cm": pen, "contact_dist_cm": cdist,
        "goal_pos_cm": gpos, "goal_rot_rad": grot, "foot_skate_cm": skate,
    }


def stage_eval(cfg: PipelineConfig, out: Path, log=print) -> dict:
    """Held-out experiment: paired unguided/guided rollouts + metrics."""
    out = Path(out)
    model, _ = load_checkpoint(out / "model.tmck")
    denoiser = numpy_denoiser(model)
    schedule = cosine_schedule(cfg.diffusion_steps)
    sk = default_skeleton()
    codebook = style_codebook()
    fields = eval_terrains(cfg)
    pairs = eval_pairs(cfg, fields)
    spec = guidance_from_config(cfg)
    walk_id = STYLES["walk"].style_id
    styles = style_schedule_from_changes([(0, walk_id)], 4000)

    eval_dir = _ensure(out / "eval")
    rows = []
    t0 = time.time()
    for p, (fi, start, goal) in enumerate(pairs):
        field = fields[fi]
        for guided in (False, True):
            rng = np.random.default_rng(cfg.seed * 1_000_003 + 8000 + p)
            res = autoregressive_rollout(
                denoiser, field, [goal], styles, schedule, rng,
                start=start, guidance=spec if guided else no_guidance(),
                skeleton=sk, max_segments=cfg.max_segments,
                goal_reach_eps=cfg.goal_reach_eps, codebook=codebook,
                fps=cfg.fps,
            )
            row = {"pair": p, "field": fi, "guided": guided,
                   "completed": res.completed,
                   "segments": len(res.segments)}
            row.update(_run_metrics(res.motion, goal, field, sk))
            rows.append(row)
        if (p + 1) % 10 == 0:
            log(f"eval: {p + 1}/{len(pairs)} pairs ({time.time() - t0:.0f}s)")

    # diversity: repeated single-segment samples on the first pair
    fi, start, goal = pairs[0]
    div_motions = []
    for s in range(cfg.diversity_samples):
        rng = np.random.default_rng(cfg.seed * 1_000_003 + 99_000 + s)
        res = autoregressive_rollout(
            denoiser, fields[fi], [goal], styles, schedule, rng,
            start=start, guidance=no_guidance(), skeleton=sk,
            max_segments=1, codebook=codebook, fps=cfg.fps,
        )
        div_motions.append(res.motion)
    div = diversity(div_motions, sk) if len(div_motions) >= 2 else 0.0

    with open(eval_dir / "report.jsonl", "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")

    summary = {"pairs": len(pairs), "diversity": div}
    for guided in (False, True):
        arm = [r for r in rows if r["guided"] == guided]
        name = "guided" if guided else "unguided"
        summary[name] = {
            key: float(np.mean([r[key] for r in arm]))
            for key in ("penetration_cm", "contact_dist_cm", "goal_pos_cm",
                        "goal_rot_rad", "foot_skate_cm")
        }
        summary[name]["completed"] = int(sum(r["completed"] for r in arm))
    pen_u = summary["unguided"]["penetration_cm"]
    pen_g = summary["guided"]["penetration_cm"]
    skate_u = summary["unguided"]["foot_skate_cm"]
    skate_g = summary["guided"]["foot_skate_cm"]
    summary["penetration_reduction"] = (
        (pen_u - pen_g) / pen_u if pen_u > 0 else 0.0
    )
    summary["foot_skate_increase"] = (
        (skate_g - skate_u) / skate_u if skate_u > 0 else 0.0
    )
    with open(eval_dir / "report.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    log(
        "eval: goal_pos {:.1f} cm, goal_rot {:.3f} rad, "
        "penetration {:.2f} -> {:.2f} cm ({:+.0%}), "
        "skate {:.2f} -> {:.2f} cm ({:+.0%})".format(
            summary["guided"]["goal_pos_cm"], summary["guided"]["goal_rot_rad"],
            pen_u, pen_g, -summary["penetration_reduction"],
            skate_u, skate_g, summary["foot_skate_increase"],
        )
    )
    return summary


def run_pipeline(cfg: PipelineConfig, out, log=print) -> dict:
    """gen-data -> fit -> build-train -> train -> eval; returns the summary."""
    out = Path(out)
    stage_gen_data(cfg, out, log)
    stage_fit(cfg, out, log)
    stage_build_train(cfg, out, log)
    stage_train(cfg, out, log)
    return stage_eval(cfg, out, log)
