"""Diffusion noise schedule (cosine alpha-bar over 100 steps).

The reverse process uses the clean-signal parameterization: the model
predicts x0, the posterior q(x_{n-1} | x_n, x0) supplies the mean, and
the fixed variance is the posterior variance beta-tilde. At n = 0 the
posterior variance is exactly 0, so the final step adds no noise.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_STEPS = 100


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    alpha_bars_prev: np.ndarray   # alpha_bar_{n-1} with alpha_bar_{-1} = 1
    posterior_variance: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.betas)

    def validate(self) -> None:
        if np.any(self.betas <= 0) or np.any(self.betas >= 1):
            raise ValueError("betas must lie strictly inside (0, 1)")
        if np.any(np.diff(self.alpha_bars) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")


def cosine_schedule(steps: int = DEFAULT_STEPS, s: float = 0.008,
                    max_beta: float = 0.999) -> NoiseSchedule:
    n = np.arange(steps + 1, dtype=np.float64)
    f = np.cos((n / steps + s) / (1 + s) * np.pi / 2) ** 2
    alpha_bars = f[1:] / f[0]
    alpha_bars_prev = np.concatenate([[1.0], alpha_bars[:-1]])
    betas = np.clip(1.0 - alpha_bars / alpha_bars_prev, 1e-8, max_beta)
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)  # re-derive after clipping
    alpha_bars_prev = np.concatenate([[1.0], alpha_bars[:-1]])
    posterior_variance = betas * (1.0 - alpha_bars_prev) / (1.0 - alpha_bars)
    sched = NoiseSchedule(
        betas=betas,
        alphas=alphas,
        alpha_bars=alpha_bars,
        alpha_bars_prev=alpha_bars_prev,
        posterior_variance=posterior_variance,
    )
    sched.validate()
    return sched


def posterior_mean(schedule: NoiseSchedule, x0: np.ndarray, x_n: np.ndarray, n: int) -> np.ndarray:
    """Mean of q(x_{n-1} | x_n, x0)."""
    ab = schedule.alpha_bars[n]
    ab_prev = schedule.alpha_bars_prev[n]
    beta = schedule.betas[n]
    alpha = schedule.alphas[n]
    c0 = np.sqrt(ab_prev) * beta / (1.0 - ab)
    cn = np.sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab)
    return c0 * x0 + cn * x_n


def forward_noise(x0: np.ndarray, n: int, schedule: NoiseSchedule,
                  rng: np.random.Generator) -> np.ndarray:
    """Sample x_n ~ q(x_n | x0): sqrt(ab_n) x0 + sqrt(1 - ab_n) eps."""
    ab = schedule.alpha_bars[n]
    eps = rng.standard_normal(size=x0.shape)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
