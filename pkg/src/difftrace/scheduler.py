"""Noise schedule and the deterministic per-timestep refinement update.

The schedule fixes how strongly each train step is noised (betas and their
cumulative alpha products) and which train steps the inference loop visits.
``step`` removes predicted noise with the deterministic (eta = 0) update:
reconstruct the clean-image estimate, then re-noise it to the previous
(less noisy) level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng

DEFAULT_TRAIN_STEPS = 1000
DEFAULT_INFERENCE_STEPS = 50
DEFAULT_BETA_START = 0.00085
DEFAULT_BETA_END = 0.012
DEFAULT_LATENT_SHAPE = (4, 64, 64)

SPACING_SCALED_LINEAR = "scaled_linear"
SPACING_LINEAR = "linear"


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class LatentTensor:
    """The image representation being refined: channels x height x width."""

    data: np.ndarray
    timestep_index: int = 0

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ScheduleError(f"latent must be 3-D, got shape {self.data.shape}")
        if self.data.dtype != np.float32:
            object.__setattr__(self, "data", self.data.astype(np.float32))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class NoiseSchedule:
    num_train_steps: int
    num_inference_steps: int
    beta_start: float
    beta_end: float
    spacing: str
    betas: np.ndarray = field(repr=False)
    alphas: np.ndarray = field(repr=False)
    alpha_bars: np.ndarray = field(repr=False)
    timesteps: tuple[int, ...]

    def __post_init__(self):
        if not ((self.betas > 0) & (self.betas < 1)).all():
            raise ScheduleError("betas must lie strictly inside (0, 1)")
        if not (np.diff(self.alpha_bars) < 0).all():
            raise ScheduleError("alpha_bars must be strictly decreasing")
        if self.alpha_bars[0] >= 1:
            raise ScheduleError("alpha_bars[0] must be below 1")
        if len(self.timesteps) != self.num_inference_steps:
            raise ScheduleError("one timestep per inference step required")
        if not all(a > b for a, b in zip(self.timesteps, self.timesteps[1:])):
            raise ScheduleError("timesteps must be strictly decreasing")

    def alpha_bar_at(self, i: int) -> float:
        """Cumulative alpha at inference step i."""
        return float(self.alpha_bars[self.timesteps[i]])

    def alpha_bar_prev(self, i: int) -> float:
        """Cumulative alpha at the step after i; 1 beyond the last step."""
        if i + 1 < self.num_inference_steps:
            return float(self.alpha_bars[self.timesteps[i + 1]])
        return 1.0

    def metadata(self) -> dict:
        return {
            "train_steps": self.num_train_steps,
            "inference_steps": self.num_inference_steps,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
            "spacing": self.spacing,
            "sampler": "ddim",
        }


def build_schedule(
    num_train_steps: int = DEFAULT_TRAIN_STEPS,
    num_inference_steps: int = DEFAULT_INFERENCE_STEPS,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
    spacing: str = SPACING_SCALED_LINEAR,
) -> NoiseSchedule:
    """Build the per-timestep coefficients and the inference timestep list.

    With ``scaled_linear`` spacing, sqrt(beta) is linear between
    sqrt(beta_start) and sqrt(beta_end). Inference timestep i is
    ``round((train/inference) * (inference - 1 - i)) + 1``, descending.
    """
    if not (0 < beta_start <= beta_end < 1):
        raise ScheduleError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    if not (1 <= num_inference_steps <= num_train_steps):
        raise ScheduleError(
            f"need 1 <= inference steps <= train steps, got "
            f"{num_inference_steps}, {num_train_steps}"
        )
    if spacing == SPACING_SCALED_LINEAR:
        betas = (
            np.linspace(
                math.sqrt(beta_start), math.sqrt(beta_end), num_train_steps,
                dtype=np.float64,
            )
            ** 2
        )
    elif spacing == SPACING_LINEAR:
        betas = np.linspace(beta_start, beta_end, num_train_steps, dtype=np.float64)
    else:
        raise ScheduleError(f"unknown spacing {spacing!r}")

    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    stride = num_train_steps / num_inference_steps
    timesteps = tuple(
        round(stride * (num_inference_steps - 1 - i)) + 1
        for i in range(num_inference_steps)
    )
    return NoiseSchedule(
        num_train_steps=num_train_steps,
        num_inference_steps=num_inference_steps,
        beta_start=beta_start,
        beta_end=beta_end,
        spacing=spacing,
        betas=betas,
        alphas=alphas,
        alpha_bars=alpha_bars,
        timesteps=timesteps,
    )


def step(
    latent: LatentTensor,
    predicted_noise: LatentTensor,
    schedule: NoiseSchedule,
    i: int,
) -> LatentTensor:
    """One deterministic refinement update at inference step i.

    predicted_x0 = (latent - sqrt(1 - ab_t) * noise) / sqrt(ab_t), then
    re-noise to the previous level:
    sqrt(ab_prev) * predicted_x0 + sqrt(1 - ab_prev) * noise.
    """
    if latent.data.shape != predicted_noise.data.shape:
        raise ScheduleError(
            f"latent shape {latent.data.shape} != noise shape "
            f"{predicted_noise.data.shape}"
        )
    if not (0 <= i < schedule.num_inference_steps):
        raise ScheduleError(f"inference step index {i} out of range")
    x = latent.data.astype(np.float64)
    eps = predicted_noise.data.astype(np.float64)
    if not np.isfinite(x).all() or not np.isfinite(eps).all():
        raise ScheduleError(f"non-finite input at inference step {i}")

    ab_t = schedule.alpha_bar_at(i)
    ab_prev = schedule.alpha_bar_prev(i)
    pred_x0 = (x - math.sqrt(1.0 - ab_t) * eps) / math.sqrt(ab_t)
    out = math.sqrt(ab_prev) * pred_x0 + math.sqrt(1.0 - ab_prev) * eps
    return LatentTensor(data=out.astype(np.float32), timestep_index=i + 1)


def initial_noise(
    seed: int, shape: tuple[int, int, int] = DEFAULT_LATENT_SHAPE
) -> LatentTensor:
    """Standard-normal starting latent from the counter-based generator;
    identical seeds produce bit-identical tensors."""
    count = int(np.prod(shape))
    values = rng.normals(seed, 0, count).astype(np.float32).reshape(shape)
    return LatentTensor(data=values, timestep_index=0)
