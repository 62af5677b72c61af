"""Guided refinement loop and the noise-predictor plugins.

Each inference step asks the predictor for conditional and unconditional
noise estimates, combines them with classifier-free guidance
(u + scale * (c - u)), and hands the result to the scheduler update. Every
intermediate latent is recorded so downstream views can replay the whole
refinement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import numpy as np

from . import tensorio
from .scheduler import (
    DEFAULT_LATENT_SHAPE,
    LatentTensor,
    NoiseSchedule,
    initial_noise,
    step,
)
from .text_encoding import (
    TextEncoderPlugin,
    TextRepresentation,
    encode,
    pooled_projection,
)
from .tokenizer import Vocabulary, tokenize

BRANCH_COND = "cond"
BRANCH_UNCOND = "uncond"


class SamplerError(ValueError):
    pass


@dataclass(frozen=True)
class GuidanceConfig:
    scale: float
    uncond_representation: TextRepresentation

    def __post_init__(self):
        if not math.isfinite(self.scale) or self.scale < 0:
            raise SamplerError(f"guidance scale must be finite and >= 0, got {self.scale}")


@dataclass
class Trajectory:
    prompt: str
    seed: int
    guidance_scale: float
    latents: list[LatentTensor]
    schedule_meta: dict = field(default_factory=dict)

    def as_array(self) -> np.ndarray:
        return np.stack([lt.data for lt in self.latents])

    def __len__(self) -> int:
        return len(self.latents)


def guide(
    eps_uncond: LatentTensor, eps_cond: LatentTensor, scale: float
) -> LatentTensor:
    """Classifier-free combination u + scale * (c - u).

    Scale 0 returns the unconditional prediction and scale 1 the conditional
    one bit-for-bit (the formula reduces to them; evaluating it would only add
    rounding noise).
    """
    if eps_uncond.data.shape != eps_cond.data.shape:
        raise SamplerError(
            f"prediction shapes differ: {eps_uncond.data.shape} vs {eps_cond.data.shape}"
        )
    if not math.isfinite(scale):
        raise SamplerError(f"guidance scale must be finite, got {scale}")
    if scale == 0:
        return LatentTensor(eps_uncond.data.copy(), eps_uncond.timestep_index)
    if scale == 1:
        return LatentTensor(eps_cond.data.copy(), eps_cond.timestep_index)
    combined = eps_uncond.data + np.float32(scale) * (eps_cond.data - eps_uncond.data)
    return LatentTensor(combined, eps_uncond.timestep_index)


class NoisePredictorPlugin(Protocol):
    name: str

    def predict(
        self,
        latent: LatentTensor,
        t: int,
        text_rep: TextRepresentation,
        *,
        key: str | None = None,
        step_index: int | None = None,
        branch: str | None = None,
    ) -> LatentTensor: ...


class SyntheticNoisePredictor:
    """Closed-form surrogate for the noise-predicting network.

    eps = a * latent + b * m(text) * g(t), where m reduces the text matrix to
    latent shape (per-column means tiled cyclically over flattened latent
    positions) and g(t) = (t + 1) / ramp_scale is a scalar ramp in the train
    step. Smooth, deterministic, and sensitive to every text row.
    """

    name = "synthetic"

    def __init__(self, a: float = 1.0, b: float = 0.5, ramp_scale: int = 1000):
        self.a = a
        self.b = b
        self.ramp_scale = ramp_scale

    def _reduce_text(self, text_rep: TextRepresentation, shape) -> np.ndarray:
        return pooled_projection(text_rep, int(np.prod(shape))).reshape(shape)

    def predict(
        self,
        latent: LatentTensor,
        t: int,
        text_rep: TextRepresentation,
        *,
        key: str | None = None,
        step_index: int | None = None,
        branch: str | None = None,
    ) -> LatentTensor:
        ramp = (t + 1) / self.ramp_scale
        eps = np.float32(self.a) * latent.data + np.float32(self.b * ramp) * self._reduce_text(
            text_rep, latent.data.shape
        )
        return LatentTensor(eps.astype(np.float32), latent.timestep_index)


class IngestedNoisePredictor:
    """Replays noise tensors recorded from a real model run.

    The pack directory holds ``manifest.json`` nesting prompt key -> step
    index -> branch -> tensor filename.
    """

    name = "ingested"

    def __init__(self, pack_dir: str | Path):
        self.pack_dir = Path(pack_dir)
        manifest_path = self.pack_dir / "manifest.json"
        if not manifest_path.exists():
            raise SamplerError(f"replay pack has no manifest: {manifest_path}")
        self.manifest = json.loads(manifest_path.read_text())

    def predict(
        self,
        latent: LatentTensor,
        t: int,
        text_rep: TextRepresentation,
        *,
        key: str | None = None,
        step_index: int | None = None,
        branch: str | None = None,
    ) -> LatentTensor:
        try:
            filename = self.manifest[key][str(step_index)][branch]
        except (KeyError, TypeError):
            raise SamplerError(
                f"replay pack has no tensor for key={key!r} step={step_index} "
                f"branch={branch!r}"
            ) from None
        tensor = tensorio.read_tensor(self.pack_dir / filename)
        if tensor.shape != latent.data.shape:
            raise SamplerError(
                f"replayed tensor shape {tensor.shape} != latent shape {latent.data.shape}"
            )
        return LatentTensor(tensor, latent.timestep_index)


def predict_noise(
    latent: LatentTensor,
    t: int,
    text_rep: TextRepresentation,
    predictor: NoisePredictorPlugin,
    *,
    key: str | None = None,
    step_index: int | None = None,
    branch: str | None = None,
) -> LatentTensor:
    eps = predictor.predict(
        latent, t, text_rep, key=key, step_index=step_index, branch=branch
    )
    if eps.data.shape != latent.data.shape:
        raise SamplerError(
            f"predictor returned shape {eps.data.shape} for latent "
            f"{latent.data.shape}"
        )
    return eps


def unconditional_representation(
    vocab: Vocabulary, encoder: TextEncoderPlugin, key: str | None = None
) -> TextRepresentation:
    """Representation of the empty prompt, used by every guided step."""
    return encode(tokenize("", vocab), encoder, key)


def run_trajectory(
    prompt: str,
    seed: int,
    schedule: NoiseSchedule,
    vocab: Vocabulary,
    encoder: TextEncoderPlugin,
    predictor: NoisePredictorPlugin,
    guidance: GuidanceConfig,
    *,
    key: str | None = None,
    latent_shape: tuple[int, int, int] = DEFAULT_LATENT_SHAPE,
) -> Trajectory:
    """Run the full guided refinement loop, recording every latent.

    The unconditional branch is evaluated even at scale 1 so replay packs
    stay complete and the loop shape does not depend on the scale.
    """
    seq = tokenize(prompt, vocab)
    cond = encode(seq, encoder, key)

    latent = initial_noise(seed, latent_shape)
    latents = [latent]
    for i in range(schedule.num_inference_steps):
        t = schedule.timesteps[i]
        eps_c = predict_noise(
            latent, t, cond, predictor, key=key, step_index=i, branch=BRANCH_COND
        )
        eps_u = predict_noise(
            latent,
            t,
            guidance.uncond_representation,
            predictor,
            key=key,
            step_index=i,
            branch=BRANCH_UNCOND,
        )
        latent = step(latent, guide(eps_u, eps_c, guidance.scale), schedule, i)
        if not np.isfinite(latent.data).all():
            raise SamplerError(f"non-finite latent after inference step {i}")
        latents.append(latent)

    return Trajectory(
        prompt=prompt,
        seed=seed,
        guidance_scale=guidance.scale,
        latents=latents,
        schedule_meta=schedule.metadata(),
    )


def save_trajectory(trajectory: Trajectory, path: str | Path) -> None:
    """Write a trajectory as one stacked tensor with its run settings."""
    meta = {
        "prompt": trajectory.prompt,
        "seed": trajectory.seed,
        "guidance_scale": trajectory.guidance_scale,
        "schedule": trajectory.schedule_meta,
    }
    tensorio.write_tensor(path, trajectory.as_array(), meta=meta)


def load_trajectory(path: str | Path) -> Trajectory:
    array, header = tensorio.read_tensor_with_header(path)
    meta = header.get("meta", {})
    if array.ndim != 4:
        raise SamplerError(f"trajectory tensor must be 4-D, got {array.shape}")
    latents = [LatentTensor(array[i], timestep_index=i) for i in range(array.shape[0])]
    return Trajectory(
        prompt=meta.get("prompt", ""),
        seed=int(meta.get("seed", 0)),
        guidance_scale=float(meta.get("guidance_scale", 0.0)),
        latents=latents,
        schedule_meta=meta.get("schedule", {}),
    )
