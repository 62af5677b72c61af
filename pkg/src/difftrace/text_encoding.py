"""Per-token text representations and text/image similarity.

Two interchangeable encoder plugins produce the representation matrix that
conditions the refinement loop: a synthetic one (hash-derived standard-normal
rows, cheap and fully deterministic) and an ingested one (precomputed tensors
captured offline from a real text encoder, looked up by prompt key). Sampler
and bundle code behave identically under either.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from . import rng, tensorio
from .tokenizer import TokenSequence

DEFAULT_EMBED_DIM = 768

SOURCE_SYNTHETIC = "synthetic"
SOURCE_INGESTED = "ingested"


class EncodingError(ValueError):
    pass


@dataclass(frozen=True)
class TextRepresentation:
    """Matrix of one row per token slot, float32."""

    vectors: np.ndarray
    source: str

    def __post_init__(self):
        if self.vectors.ndim != 2:
            raise EncodingError(f"expected a 2-D matrix, got shape {self.vectors.shape}")
        if not np.isfinite(self.vectors).all():
            raise EncodingError("text representation contains non-finite entries")

    @property
    def embed_dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class JointEmbedding:
    """A unit-norm text vector paired with a unit-norm image vector."""

    text_vector: np.ndarray
    image_vector: np.ndarray

    def __post_init__(self):
        for name, vec in (("text", self.text_vector), ("image", self.image_vector)):
            norm = float(np.linalg.norm(vec))
            if abs(norm - 1.0) > 1e-5:
                raise EncodingError(f"{name} vector norm {norm} is not 1 within 1e-5")
        if self.text_vector.shape != self.image_vector.shape:
            raise EncodingError("text and image vectors differ in dimension")


class TextEncoderPlugin(Protocol):
    name: str
    embed_dim: int

    def encode_ids(self, ids: tuple[int, ...], key: str | None) -> np.ndarray: ...


class SyntheticTextEncoder:
    """Deterministic stand-in encoder.

    Row entries are standard normals derived from a 64-bit mixing hash of
    (token id, column, seed): entry (i, j) uses the Box-Muller pair at
    positions (2j, 2j+1) of the substream keyed by token id ids[i]. Rows
    therefore depend only on the token id, so changing one id changes exactly
    that row.
    """

    name = SOURCE_SYNTHETIC

    def __init__(self, seed: int = 0, embed_dim: int = DEFAULT_EMBED_DIM):
        self.seed = seed
        self.embed_dim = embed_dim
        self._row_cache: dict[int, np.ndarray] = {}

    def _row(self, token_id: int) -> np.ndarray:
        row = self._row_cache.get(token_id)
        if row is None:
            sub = rng.substream(self.seed, token_id)
            row = rng.normals(sub, 0, self.embed_dim).astype(np.float32)
            self._row_cache[token_id] = row
        return row

    def encode_ids(self, ids: tuple[int, ...], key: str | None = None) -> np.ndarray:
        return np.stack([self._row(t) for t in ids])


class IngestedTextEncoder:
    """Looks up per-prompt representation tensors captured offline.

    The pack directory holds ``manifest.json`` mapping prompt key to a tensor
    file (binary format from :mod:`difftrace.tensorio`).
    """

    name = SOURCE_INGESTED

    def __init__(self, pack_dir: str | Path, embed_dim: int = DEFAULT_EMBED_DIM):
        self.pack_dir = Path(pack_dir)
        self.embed_dim = embed_dim
        manifest_path = self.pack_dir / "manifest.json"
        if not manifest_path.exists():
            raise EncodingError(f"tensor pack has no manifest: {manifest_path}")
        self.manifest: dict[str, str] = json.loads(manifest_path.read_text())

    def encode_ids(self, ids: tuple[int, ...], key: str | None = None) -> np.ndarray:
        if key is None or key not in self.manifest:
            raise EncodingError(
                f"tensor pack at {self.pack_dir} has no entry for prompt key {key!r}"
            )
        tensor = tensorio.read_tensor(self.pack_dir / self.manifest[key])
        expected = (len(ids), self.embed_dim)
        if tensor.shape != expected:
            raise EncodingError(
                f"tensor for key {key!r} has shape {tensor.shape}, expected {expected}"
            )
        return tensor


def encode(
    seq: TokenSequence, encoder: TextEncoderPlugin, key: str | None = None
) -> TextRepresentation:
    """Encode a token sequence into its per-token representation matrix."""
    vectors = encoder.encode_ids(seq.ids, key)
    if vectors.shape[0] != len(seq.ids):
        raise EncodingError(
            f"encoder returned {vectors.shape[0]} rows for {len(seq.ids)} tokens"
        )
    return TextRepresentation(
        vectors=np.ascontiguousarray(vectors, dtype=np.float32), source=encoder.name
    )


def pooled_projection(rep: TextRepresentation, count: int) -> np.ndarray:
    """Fixed linear reduction of a representation matrix to ``count`` values:
    per-column means tiled cyclically. Shared by the surrogate noise
    predictor and the text/image linkage computation."""
    means = rep.vectors.mean(axis=0)
    reps = -(-count // means.size)
    return np.tile(means, reps)[:count]


def unit_vector(values: np.ndarray) -> np.ndarray:
    flat = np.asarray(values, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(flat))
    if norm == 0.0:
        raise EncodingError("cannot normalize a zero vector")
    return flat / norm


def similarity(pair: JointEmbedding) -> float:
    """Dot product of the pair; equals cosine similarity for unit vectors."""
    return float(np.dot(pair.text_vector, pair.image_vector))


def linkage_matrix(
    texts: list[np.ndarray], images: list[np.ndarray]
) -> np.ndarray:
    """Pairwise similarities: entry (i, j) links text i with image j."""
    dims = {v.shape for v in texts} | {v.shape for v in images}
    if len(dims) > 1:
        raise EncodingError(f"mixed vector dimensions: {sorted(dims)}")
    out = np.empty((len(texts), len(images)), dtype=np.float64)
    for i, t in enumerate(texts):
        for j, im in enumerate(images):
            out[i, j] = similarity(JointEmbedding(text_vector=t, image_vector=im))
    return out
