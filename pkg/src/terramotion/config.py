"""Pipeline configuration: sectioned key=value files, strictly validated.

Unknown sections or keys are errors (fail fast on typos), and a config
written back to disk parses to identical values.
"""

import configparser
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .styles import STYLES


@dataclass
class PipelineConfig:
    # [pipeline]
    seed: int = 0
    jobs: int = 1
    # [terrain]
    cell_size: float = 0.05
    patch_count: int = 400
    source_size: float = 8.0
    # [data]
    clip_count: int = 120
    styles: tuple = ("walk", "run", "crouch")
    clip_frames: int = 60
    fps: float = 30.0
    # [fitting]
    top_k: int = 3
    jump_threshold: float = 0.3
    # [diffusion]
    frames: int = 40
    seed_frames: int = 10
    diffusion_steps: int = 100
    lambda_pos: float = 4.0
    width: int = 128
    layers: int = 4
    heads: int = 4
    ff_width: int = 256
    train_steps: int = 12_000
    batch_size: int = 32
    learning_rate: float = 3e-4
    # [guidance]
    guide_phys: float = 3.0
    guide_smooth: float = 50.0
    guide_collision: float = 50.0
    guide_mode: str = "final_step"
    # [eval]
    eval_pairs: int = 50
    goal_min_dist: float = 1.2
    goal_max_dist: float = 2.5
    max_segments: int = 12
    goal_reach_eps: float = 0.15
    diversity_samples: int = 4

    def validate(self) -> None:
        if self.patch_count < 1 or self.clip_count < 1:
            raise ConfigError("patch_count and clip_count must be positive")
        if not 0 < self.cell_size <= 0.3:
            raise ConfigError("cell_size out of range (0, 0.3]")
        bad = [s for s in self.styles if s not in STYLES]
        if bad:
            raise ConfigError(f"unknown styles: {bad}")
        if self.seed_frames >= self.frames:
            raise ConfigError("seed_frames must be smaller than frames")
        if self.jump_threshold <= 0:
            raise ConfigError("jump_threshold must be positive")
        if self.guide_mode not in ("final_step", "every_step"):
            raise ConfigError("guide_mode must be final_step or every_step")
        if min(self.guide_phys, self.guide_smooth, self.guide_collision) < 0:
            raise ConfigError("guidance weights must be non-negative")
        if self.goal_min_dist > self.goal_max_dist:
            raise ConfigError("goal_min_dist must not exceed goal_max_dist")


_SECTIONS = {
    "pipeline": ("seed", "jobs"),
    "terrain": ("cell_size", "patch_count", "source_size"),
    "data": ("clip_count", "styles", "clip_frames", "fps"),
    "fitting": ("top_k", "jump_threshold"),
    "diffusion": (
        "frames", "seed_frames", "diffusion_steps", "lambda_pos", "width",
        "layers", "heads", "ff_width", "train_steps", "batch_size",
        "learning_rate",
    ),
    "guidance": ("guide_phys", "guide_smooth", "guide_collision", "guide_mode"),
    "eval": (
        "eval_pairs", "goal_min_dist", "goal_max_dist", "max_segments",
        "goal_reach_eps", "diversity_samples",
    ),
}

_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_value(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if kind in (int, "int"):
        return int(raw)
    if kind in (float, "float"):
        return float(raw)
    if kind in (tuple, "tuple"):
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    return raw


def load_config(path) -> PipelineConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file: {path}")
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
            try:
                values[key] = _parse_value(key, raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw}") from exc
    cfg = PipelineConfig(**values)
    cfg.validate()
    return cfg


def save_config(path, cfg: PipelineConfig) -> None:
    cfg.validate()
    parser = configparser.ConfigParser()
    for section, keys in _SECTIONS.items():
        parser[section] = {}
        for key in keys:
            value = getattr(cfg, key)
            if isinstance(value, tuple):
                parser[section][key] = ",".join(value)
            else:
                parser[section][key] = repr(value) if isinstance(value, float) else str(value)
    with open(path, "w") as fh:
        parser.write(fh)
