#!/usr/bin/env python3
"""The whole pipeline at smoke scale: data generation, fitting, training
a tiny denoiser for a few hundred steps, and the paired guided/unguided
evaluation. Finishes in about a minute; the numbers are those of a
barely-trained model and only demonstrate the plumbing.

For a real run (the acceptance-grade configuration), see the README or
`terramotion run-all`.
"""
import json
from pathlib import Path

from terramotion.config import PipelineConfig
from terramotion.pipeline import run_pipeline

cfg = PipelineConfig(
    seed=1,
    patch_count=30,
    clip_count=12,
    styles=("walk", "run", "crouch"),
    train_steps=400,
    width=64, layers=2, heads=2, ff_width=96, batch_size=16,
    eval_pairs=4,
    max_segments=8,
    diversity_samples=2,
)

out = Path("out/pipeline_smoke")
summary = run_pipeline(cfg, out)
print("\nfinal summary:")
print(json.dumps(summary, indent=2))
print(f"\nartifacts under {out}/ (bank/, clips/, fits/, shards/, model.tmck, eval/)")
