"""Training: differentiable FK, the two-term loss, and the train loop.

The loss follows the clean-signal parameterization: an L2 norm on the
raw motion features plus a weighted L2 norm on joint positions pushed
through forward kinematics (weight 4 by default), averaged over the
batch. The FK here is a differentiable twin of the numpy implementation
and is cross-checked against it in the tests.
"""

import math
import time
from dataclasses import dataclass

import numpy as np
import torch

from .motion import FEATURE_DIM
from .skeleton import Skeleton, default_skeleton

POSITION_LOSS_WEIGHT = 4.0


def sixd_to_matrix_torch(r: torch.Tensor) -> torch.Tensor:
    """Gram-Schmidt 6D decode, (..., 6) -> (..., 3, 3), autograd-friendly."""
    a1, a2 = r[..., :3], r[..., 3:]
    c1 = a1 / a1.norm(dim=-1, keepdim=True).clamp_min(1e-8)
    u = a2 - (a2 * c1).sum(dim=-1, keepdim=True) * c1
    c2 = u / u.norm(dim=-1, keepdim=True).clamp_min(1e-8)
    c3 = torch.cross(c1, c2, dim=-1)
    return torch.stack([c1, c2, c3], dim=-1)


def fk_torch(skeleton: Skeleton, features: torch.Tensor) -> torch.Tensor:
    """Joint positions (..., F, J, 3) from flat features (..., F, D)."""
    j = skeleton.joint_count
    rot = sixd_to_matrix_torch(features[..., : j * 6].reshape(*features.shape[:-1], j, 6))
    root = features[..., j * 6 : j * 6 + 3]
    offsets = torch.as_tensor(skeleton.offsets, dtype=features.dtype, device=features.device)

    globals_ = [rot[..., 0, :, :]]
    positions = [root]
    for i in range(1, j):
        par = int(skeleton.parents[i])
        positions.append(positions[par] + (globals_[par] @ offsets[i]))
        globals_.append(globals_[par] @ rot[..., i, :, :])
    return torch.stack(positions, dim=-2)


def training_loss(
    pred: torch.Tensor,
    target: torch.Tensor,
    skeleton: Skeleton | None = None,
    position_weight: float = POSITION_LOSS_WEIGHT,
) -> torch.Tensor:
    """Feature L2 norm + weighted FK-position L2 norm, batch mean.

    Accepts (F, D) singles or (B, F, D) batches of future-frame features.
    """
    sk = skeleton or default_skeleton()
    if pred.dim() == 2:
        pred = pred[None]
        target = target[None]
    feat_term = (pred - target).flatten(1).norm(dim=1)
    if position_weight != 0.0:
        p_pred = fk_torch(sk, pred)
        p_true = fk_torch(sk, target)
        pos_term = (p_pred - p_true).flatten(1).norm(dim=1)
    else:
        pos_term = torch.zeros_like(feat_term)
    return (feat_term + position_weight * pos_term).mean()


def training_loss_numpy(pred: np.ndarray, target: np.ndarray,
                        skeleton: Skeleton | None = None,
                        position_weight: float = POSITION_LOSS_WEIGHT) -> float:
    """Convenience wrapper evaluating the loss on numpy arrays."""
    return float(
        training_loss(
            torch.from_numpy(np.ascontiguousarray(pred, dtype=np.float64)),
            torch.from_numpy(np.ascontiguousarray(target, dtype=np.float64)),
            skeleton,
            position_weight,
        )
    )


@dataclass
class TrainConfig:
    steps: int = 12_000
    batch_size: int = 32
    learning_rate: float = 3e-4
    position_weight: float = POSITION_LOSS_WEIGHT
    seed: int = 0
    log_every: int = 500
    lr_decay_at: float = 0.8  # fraction of steps after which lr drops 10x


def train_denoiser(model, samples, schedule, config: TrainConfig,
                   skeleton: Skeleton | None = None, log=print):
    """Train an x0-predicting denoiser on packed training tensors.

    `samples` is the dict produced by terramotion.dataset.pack_samples:
    float32 tensors keyed by features/scene/text plus the seed split.
    Deterministic for a fixed config seed and thread count.
    """
    sk = skeleton or default_skeleton()
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    features = torch.from_numpy(samples["features"])  # (S, frames, D)
    scene = torch.from_numpy(samples["scene"])        # (S, frames, 145)
    text = torch.from_numpy(samples["text"])          # (S, frames, 64)
    k = model.cfg.seed_frames
    count = features.shape[0]

    alpha_bars = torch.from_numpy(schedule.alpha_bars.astype(np.float32))
    optim = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    model.train()

    t0 = time.time()
    history = []
    for step in range(config.steps):
        if step == int(config.steps * config.lr_decay_at):
            for group in optim.param_groups:
                group["lr"] = config.learning_rate * 0.1
        idx = torch.from_numpy(rng.integers(0, count, size=config.batch_size))
        batch = features[idx]
        seed_block = batch[:, :k]
        future = batch[:, k:]

        n = torch.from_numpy(rng.integers(0, schedule.steps, size=config.batch_size))
        ab = alpha_bars[n][:, None, None]
        noise = torch.from_numpy(
            rng.standard_normal(size=tuple(future.shape)).astype(np.float32)
        )
        noisy = torch.sqrt(ab) * future + torch.sqrt(1 - ab) * noise

        pred = model(noisy, n, scene[idx], text[idx], seed_block)
        loss = training_loss(pred, future, sk, config.position_weight)
        optim.zero_grad(set_to_none=True)
        loss.backward()
        torch.nn.utils.clip_grad_norm_(model.parameters(), 1.0)
        optim.step()

        if step % config.log_every == 0 or step == config.steps - 1:
            value = float(loss.detach())
            history.append((step, value))
            log(f"step {step:6d}  loss {value:.4f}  ({time.time() - t0:.0f}s)")
    model.eval()
    return history
