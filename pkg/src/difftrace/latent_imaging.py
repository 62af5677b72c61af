"""Render latents as small RGB images via a linear map, and upscale them.

Decoding is a per-pixel affine map from latent channels to RGB followed by a
fixed value mapping from [-1, 1] to [0, 255] (v -> rint((v + 1) * 127.5),
so 0 maps to 128). Upscaling uses integer-only arithmetic (plain index
division for nearest, Q16.16 fixed point for bilinear) so results are
bit-exact everywhere.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from .scheduler import LatentTensor

FIXED_ONE = 1 << 16  # Q16.16


class ImagingError(ValueError):
    pass


@dataclass(frozen=True)
class LinearDecoder:
    """3 x channels weight matrix plus bias, both in pre-clamp [-1, 1] space."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != 3:
            raise ImagingError(f"weights must be 3 x channels, got {w.shape}")
        if b.shape != (3,):
            raise ImagingError(f"bias must have 3 entries, got {b.shape}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ImagingError("decoder coefficients must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def channels(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class RgbImage:
    width: int
    height: int
    pixels: np.ndarray  # height x width x 3, uint8

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width, 3):
            raise ImagingError(
                f"pixel buffer {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )
        if self.pixels.dtype != np.uint8:
            raise ImagingError("pixels must be uint8")


def load_decoder(source: str | Path | bytes | None = None) -> LinearDecoder:
    """Read decoder coefficients from a JSON config; None loads the default
    coefficients shipped with the package (fitted offline by least squares)."""
    if source is None:
        raw = (resources.files("difftrace.data") / "decoder.json").read_bytes()
    elif isinstance(source, bytes):
        raw = source
    else:
        raw = Path(source).read_bytes()
    config = json.loads(raw)
    return LinearDecoder(
        weights=np.array(config["weights"], dtype=np.float64),
        bias=np.array(config["bias"], dtype=np.float64),
    )


def generic_decoder(channels: int) -> LinearDecoder:
    """Round-robin channel picker for latents the shipped coefficients do not
    cover; RGB row r reads latent channel r mod channels."""
    weights = np.zeros((3, channels))
    for r in range(3):
        weights[r, r % channels] = 1.0
    return LinearDecoder(weights=weights, bias=np.zeros(3))


def decode_values(latent: LatentTensor, dec: LinearDecoder) -> np.ndarray:
    """Pre-clamp float output (3 x H x W); linear in the latent when the bias
    is zero, which is what the linearity tests exercise."""
    if latent.data.shape[0] != dec.channels:
        raise ImagingError(
            f"latent has {latent.data.shape[0]} channels, decoder expects {dec.channels}"
        )
    return np.tensordot(dec.weights, latent.data.astype(np.float64), axes=1) + (
        dec.bias[:, None, None]
    )


def decode_linear(latent: LatentTensor, dec: LinearDecoder) -> RgbImage:
    """Decode one latent to an RGB image of the latent's spatial size."""
    values = decode_values(latent, dec)
    mapped = np.rint((values + 1.0) * 127.5)
    pixels = np.clip(mapped, 0, 255).astype(np.uint8).transpose(1, 2, 0)
    h, w = pixels.shape[:2]
    return RgbImage(width=w, height=h, pixels=np.ascontiguousarray(pixels))


def _axis_positions(src: int, dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Q16.16 center-aligned sample positions for one axis: floor index,
    neighbor index, and fractional weight."""
    d = np.arange(dst, dtype=np.int64)
    pos = ((2 * d + 1) * src * FIXED_ONE) // (2 * dst) - FIXED_ONE // 2
    x0 = pos >> 16
    frac = pos - (x0 << 16)
    below = x0 < 0
    x0[below] = 0
    frac[below] = 0
    x1 = np.minimum(x0 + 1, src - 1)
    x0 = np.minimum(x0, src - 1)
    return x0, x1, frac


def upscale(img: RgbImage, target_w: int, target_h: int, mode: str = "nearest") -> RgbImage:
    """Resample up to (target_w, target_h); downscaling is rejected."""
    if target_w < img.width or target_h < img.height:
        raise ImagingError(
            f"downscale request: {img.width}x{img.height} -> {target_w}x{target_h}"
        )
    if mode == "nearest":
        xs = (np.arange(target_w, dtype=np.int64) * img.width) // target_w
        ys = (np.arange(target_h, dtype=np.int64) * img.height) // target_h
        pixels = img.pixels[ys[:, None], xs[None, :]]
    elif mode == "bilinear":
        x0, x1, fx = _axis_positions(img.width, target_w)
        y0, y1, fy = _axis_positions(img.height, target_h)
        p = img.pixels.astype(np.int64)
        p00 = p[y0[:, None], x0[None, :]]
        p10 = p[y0[:, None], x1[None, :]]
        p01 = p[y1[:, None], x0[None, :]]
        p11 = p[y1[:, None], x1[None, :]]
        wx1 = fx[None, :, None]
        wx0 = FIXED_ONE - wx1
        wy1 = fy[:, None, None]
        wy0 = FIXED_ONE - wy1
        acc = (
            p00 * wx0 * wy0
            + p10 * wx1 * wy0
            + p01 * wx0 * wy1
            + p11 * wx1 * wy1
            + (1 << 31)
        ) >> 32
        pixels = acc.astype(np.uint8)
    else:
        raise ImagingError(f"unknown resampling mode {mode!r}")
    return RgbImage(width=target_w, height=target_h, pixels=np.ascontiguousarray(pixels))


def fit_decoder(
    latents: list[np.ndarray], images: list[np.ndarray]
) -> tuple[LinearDecoder, float]:
    """Least-squares fit of decoder coefficients from (latent, RGB) pairs.

    Images are uint8; they are mapped back to pre-clamp space before the
    regression. Returns the decoder and its training mean absolute error in
    pixel units.
    """
    if len(latents) != len(images) or not latents:
        raise ImagingError("need one image per latent, at least one pair")
    rows = []
    targets = []
    for latent, image in zip(latents, images):
        c = latent.shape[0]
        rows.append(
            np.concatenate(
                [latent.reshape(c, -1).T, np.ones((latent[0].size, 1))], axis=1
            )
        )
        targets.append(image.reshape(-1, 3).astype(np.float64) / 127.5 - 1.0)
    design = np.concatenate(rows)
    target = np.concatenate(targets)
    solution, *_ = np.linalg.lstsq(design, target, rcond=None)
    dec = LinearDecoder(weights=solution[:-1].T, bias=solution[-1])

    mae = 0.0
    for latent, image in zip(latents, images):
        decoded = decode_linear(LatentTensor(latent.astype(np.float32)), dec)
        mae += float(
            np.abs(decoded.pixels.astype(np.float64) - image.astype(np.float64)).mean()
        )
    return dec, mae / len(latents)


def png_bytes(img: RgbImage) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="RGB").save(buf, format="PNG", optimize=False)
    return buf.getvalue()


def image_from_png(data: bytes) -> RgbImage:
    with Image.open(io.BytesIO(data)) as im:
        rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return RgbImage(width=rgb.shape[1], height=rgb.shape[0], pixels=rgb)
