"""Transformer denoiser predicting clean future motion from noisy input.

Token layout per segment: one diffusion-timestamp token, one scene token
per frame (the 12x12 goal-relative grid + root height), and one motion
token per frame formed by concatenating motion features with the frame's
64-d style code. Seed frames enter as their clean features; future
frames carry the noisy iterate. The head reads the future motion tokens
back out as the clean prediction.

Checkpoints are a versioned flat blob: magic, JSON manifest (model
config + named tensor shapes/dtypes/offsets), then raw little-endian
tensor bytes.
"""

import io
import json
import math
import struct
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn

from .motion import FEATURE_DIM
from .sampling import DiffusionCondition, SEED_FRAMES, SEGMENT_FRAMES
from .styles import TEXT_DIM

CHECKPOINT_MAGIC = b"TMCK"
CHECKPOINT_VERSION = 1

SCENE_DIM = 145  # 144 grid values + root height channel


@dataclass(frozen=True)
class DenoiserConfig:
    frames: int = SEGMENT_FRAMES
    seed_frames: int = SEED_FRAMES
    feature_dim: int = FEATURE_DIM
    scene_dim: int = SCENE_DIM
    text_dim: int = TEXT_DIM
    width: int = 128
    layers: int = 4
    heads: int = 4
    ff_width: int = 256
    diffusion_steps: int = 100


def _sinusoidal_embedding(steps: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(
        -math.log(10_000.0) * torch.arange(half, dtype=torch.float32, device=steps.device) / half
    )
    args = steps.float()[:, None] * freqs[None]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=1)


class TransformerDenoiser(nn.Module):
    def __init__(self, config: DenoiserConfig | None = None):
        super().__init__()
        cfg = config or DenoiserConfig()
        self.cfg = cfg
        w = cfg.width
        self.motion_in = nn.Linear(cfg.feature_dim + cfg.text_dim, w)
        self.scene_in = nn.Linear(cfg.scene_dim, w)
        self.time_in = nn.Sequential(nn.Linear(w, w), nn.GELU(), nn.Linear(w, w))
        tokens = 1 + 2 * cfg.frames
        self.pos_embedding = nn.Parameter(torch.zeros(tokens, w))
        nn.init.normal_(self.pos_embedding, std=0.02)
        layer = nn.TransformerEncoderLayer(
            d_model=w,
            nhead=cfg.heads,
            dim_feedforward=cfg.ff_width,
            dropout=0.0,
            activation="gelu",
            batch_first=True,
            norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(
            layer, num_layers=cfg.layers, enable_nested_tensor=False
        )
        self.head = nn.Linear(w, cfg.feature_dim)

    def forward(
        self,
        noisy_future: torch.Tensor,  # (B, frames - seed, feature)
        steps: torch.Tensor,         # (B,)
        scene: torch.Tensor,         # (B, frames, scene_dim)
        text: torch.Tensor,          # (B, frames, text_dim)
        seed: torch.Tensor,          # (B, seed_frames, feature)
    ) -> torch.Tensor:
        cfg = self.cfg
        motion = torch.cat([seed, noisy_future], dim=1)
        motion_tokens = self.motion_in(torch.cat([motion, text], dim=2))
        scene_tokens = self.scene_in(scene)
        time_token = self.time_in(_sinusoidal_embedding(steps, cfg.width))[:, None]
        tokens = torch.cat([time_token, scene_tokens, motion_tokens], dim=1)
        tokens = tokens + self.pos_embedding[None]
        encoded = self.encoder(tokens)
        future_tokens = encoded[:, 1 + cfg.frames + cfg.seed_frames :]
        return self.head(future_tokens)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def numpy_denoiser(model: TransformerDenoiser):
    """Adapt a torch model to the sampler's callable interface."""
    model.eval()

    def fn(noisy: np.ndarray, step: int, condition: DiffusionCondition) -> np.ndarray:
        with torch.no_grad():
            out = model(
                torch.from_numpy(np.ascontiguousarray(noisy, dtype=np.float32))[None],
                torch.tensor([step], dtype=torch.long),
                torch.from_numpy(np.ascontiguousarray(condition.scene, dtype=np.float32))[None],
                torch.from_numpy(np.ascontiguousarray(condition.text, dtype=np.float32))[None],
                torch.from_numpy(np.ascontiguousarray(condition.seed, dtype=np.float32))[None],
            )
        return out[0].numpy().astype(np.float64)

    return fn


def save_checkpoint(path, model: TransformerDenoiser, extra: dict | None = None) -> None:
    state = model.state_dict()
    manifest = []
    blob = io.BytesIO()
    offset = 0
    for name, tensor in state.items():
        arr = tensor.detach().cpu().numpy()
        data = np.ascontiguousarray(arr).astype("<f4").tobytes()
        manifest.append(
            {"name": name, "shape": list(arr.shape), "dtype": "f4",
             "offset": offset, "nbytes": len(data)}
        )
        blob.write(data)
        offset += len(data)
    header = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(model.cfg),
        "tensors": manifest,
        "extra": extra or {},
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob.getvalue())


def load_checkpoint(path) -> tuple[TransformerDenoiser, dict]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError("not a TMCK checkpoint")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        blob = fh.read()
    model = TransformerDenoiser(DenoiserConfig(**header["config"]))
    state = {}
    for entry in header["tensors"]:
        data = np.frombuffer(
            blob, dtype="<f4", count=entry["nbytes"] // 4, offset=entry["offset"]
        )
        state[entry["name"]] = torch.from_numpy(
            data.reshape(entry["shape"]).astype(np.float32).copy()
        )
    model.load_state_dict(state)
    return model, header["extra"]
