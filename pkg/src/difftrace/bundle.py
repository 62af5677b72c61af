"""Assemble prompts, tokens, trajectories, thumbnails, and projections into a
versioned bundle the interactive UI can load as one JSON document.

Serialization is canonical: sorted keys, compact separators, projection
coordinates rounded to 6 significant digits, binary payloads base64-encoded.
Saving a loaded bundle reproduces the bytes exactly.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import tensorio
from .latent_imaging import (
    LinearDecoder,
    decode_linear,
    generic_decoder,
    load_decoder,
    png_bytes,
    upscale,
)
from .projection import LayoutParams, project_trajectories
from .sampler import (
    GuidanceConfig,
    IngestedNoisePredictor,
    SyntheticNoisePredictor,
    run_trajectory,
    unconditional_representation,
)
from .scheduler import build_schedule
from .text_encoding import (
    IngestedTextEncoder,
    SyntheticTextEncoder,
    encode,
    linkage_matrix,
    pooled_projection,
    unit_vector,
)
from .tokenizer import (
    Vocabulary,
    load_default_vocabulary,
    load_vocabulary,
    token_strings,
    tokenize,
)

BUNDLE_VERSION = 1
DEFAULT_GUIDANCE_SCALES = (0.0, 1.0, 7.0, 20.0)
DEFAULT_SCALE = 7.0
PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class BundleError(ValueError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


@dataclass(frozen=True)
class PromptEntry:
    key: str
    text: str
    pair_key: str | None
    keywords_diff: tuple[tuple[int, int], ...]
    token_ids: tuple[int, ...]
    token_strings: tuple[str, ...]
    token_spans: tuple[tuple[int, int], ...]


@dataclass
class ExplainerBundle:
    version: int
    metadata: dict
    prompts: list[PromptEntry]
    runs: dict[str, dict]
    projections: list[dict]

    def prompt(self, key: str) -> PromptEntry:
        for entry in self.prompts:
            if entry.key == key:
                return entry
        raise BundleError(f"unknown prompt key {key!r}")


@dataclass
class BundleConfig:
    """Run configuration for one bundle build; deterministic given a seed."""

    prompts: list[dict] = field(default_factory=list)
    seed: int = 0
    train_steps: int = 1000
    inference_steps: int = 10
    beta_start: float = 0.00085
    beta_end: float = 0.012
    spacing: str = "scaled_linear"
    latent_shape: tuple[int, int, int] = (4, 64, 64)
    guidance_scales: tuple[float, ...] = DEFAULT_GUIDANCE_SCALES
    default_scale: float = DEFAULT_SCALE
    encoder: str = "synthetic"
    encoder_seed: int = 0
    encoder_pack: str | None = None
    predictor: str = "synthetic"
    predictor_pack: str | None = None
    embed_dim: int = 768
    projection_neighbors: int = 15
    projection_min_dist: float = 0.1
    projection_epochs: int = 500
    thumbnail_size: int = 128
    thumbnail_mode: str = "bilinear"
    include_latents: bool = False
    vocab_path: str | None = None
    merges_path: str | None = None
    decoder_path: str | None = None
    final_image_pack: str | None = None

    @classmethod
    def from_json(cls, source: str | Path | bytes) -> "BundleConfig":
        raw = source if isinstance(source, bytes) else Path(source).read_bytes()
        data = json.loads(raw)
        if "prompts" not in data:
            data["prompts"] = default_prompt_catalog()
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise BundleError(f"unknown config fields: {sorted(unknown)}")
        for key in ("latent_shape", "guidance_scales"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)


def default_prompt_catalog() -> list[dict]:
    raw = (resources.files("difftrace.data") / "prompts.json").read_bytes()
    return json.loads(raw)["prompts"]


def _round6(value: float) -> float:
    return float(f"{value:.6g}")


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _token_diff_spans(
    own_ids: tuple[int, ...], other_ids: tuple[int, ...], spans
) -> tuple[tuple[int, int], ...]:
    """Character spans of the tokens not shared with the partner prompt
    (common prefix and suffix stripped)."""
    prefix = 0
    while prefix < len(own_ids) and prefix < len(other_ids) and own_ids[prefix] == other_ids[prefix]:
        prefix += 1
    suffix = 0
    while (
        suffix < len(own_ids) - prefix
        and suffix < len(other_ids) - prefix
        and own_ids[-1 - suffix] == other_ids[-1 - suffix]
    ):
        suffix += 1
    return tuple(spans[prefix : len(own_ids) - suffix])


def _build_encoder(config: BundleConfig):
    if config.encoder == "synthetic":
        return SyntheticTextEncoder(seed=config.encoder_seed, embed_dim=config.embed_dim)
    if config.encoder == "ingested":
        if not config.encoder_pack:
            raise BundleError("ingested encoder requires encoder_pack")
        return IngestedTextEncoder(config.encoder_pack, embed_dim=config.embed_dim)
    raise BundleError(f"unknown encoder {config.encoder!r}")


def _build_predictor(config: BundleConfig):
    if config.predictor == "synthetic":
        return SyntheticNoisePredictor(ramp_scale=config.train_steps)
    if config.predictor == "ingested":
        if not config.predictor_pack:
            raise BundleError("ingested predictor requires predictor_pack")
        return IngestedNoisePredictor(config.predictor_pack)
    raise BundleError(f"unknown predictor {config.predictor!r}")


def _load_vocab(config: BundleConfig) -> Vocabulary:
    if config.vocab_path or config.merges_path:
        if not (config.vocab_path and config.merges_path):
            raise BundleError("vocab_path and merges_path must be given together")
        return load_vocabulary(
            Path(config.vocab_path).read_bytes(), Path(config.merges_path).read_bytes()
        )
    return load_default_vocabulary()


def _thumbnail(latent, decoder: LinearDecoder, config: BundleConfig) -> bytes:
    img = decode_linear(latent, decoder)
    size = max(config.thumbnail_size, img.width)
    return png_bytes(upscale(img, size, size, config.thumbnail_mode))


def build_bundle(config: BundleConfig) -> ExplainerBundle:
    """Run the whole engine for every catalog prompt and guidance scale."""
    if config.default_scale not in config.guidance_scales:
        raise BundleError(
            f"default scale {config.default_scale} missing from "
            f"guidance scales {config.guidance_scales}"
        )

    vocab = _load_vocab(config)
    encoder = _build_encoder(config)
    predictor = _build_predictor(config)
    if config.decoder_path:
        decoder = load_decoder(config.decoder_path)
    elif config.latent_shape[0] == load_decoder().channels:
        decoder = load_decoder()
    else:
        decoder = generic_decoder(config.latent_shape[0])
    schedule = build_schedule(
        num_train_steps=config.train_steps,
        num_inference_steps=config.inference_steps,
        beta_start=config.beta_start,
        beta_end=config.beta_end,
        spacing=config.spacing,
    )
    uncond = unconditional_representation(vocab, encoder)

    catalog = {entry["key"]: entry for entry in config.prompts}
    if len(catalog) != len(config.prompts):
        raise BundleError("prompt keys must be unique")
    sequences = {
        key: tokenize(entry["text"], vocab) for key, entry in catalog.items()
    }

    prompts: list[PromptEntry] = []
    for entry in config.prompts:
        key = entry["key"]
        seq = sequences[key]
        pair_key = entry.get("pair_key")
        if pair_key is not None:
            if pair_key not in catalog:
                raise BundleError(f"pair key {pair_key!r} does not resolve", f"prompts.{key}")
            if catalog[pair_key].get("pair_key") != key:
                raise BundleError(
                    f"pair relation with {pair_key!r} is not symmetric", f"prompts.{key}"
                )
            own = seq.content_slice(vocab)
            other = sequences[pair_key].content_slice(vocab)
            if own == other:
                raise BundleError(
                    f"paired prompts {key!r} and {pair_key!r} do not differ in any token"
                )
            diff = _token_diff_spans(own, other, seq.text_spans)
        else:
            diff = ()
        prompts.append(
            PromptEntry(
                key=key,
                text=entry["text"],
                pair_key=pair_key,
                keywords_diff=diff,
                token_ids=seq.ids,
                token_strings=tuple(token_strings(seq, vocab)),
                token_spans=seq.text_spans,
            )
        )

    final_images: dict[str, bytes] = {}
    if config.final_image_pack:
        pack = Path(config.final_image_pack)
        manifest = json.loads((pack / "manifest.json").read_text())
        final_images = {
            key: (pack / filename).read_bytes() for key, filename in manifest.items()
        }

    runs: dict[str, dict] = {}
    default_trajectories = {}
    for key in catalog:
        variants = {}
        for scale in config.guidance_scales:
            guidance = GuidanceConfig(scale=scale, uncond_representation=uncond)
            try:
                trajectory = run_trajectory(
                    catalog[key]["text"],
                    config.seed,
                    schedule,
                    vocab,
                    encoder,
                    predictor,
                    guidance,
                    key=key,
                    latent_shape=config.latent_shape,
                )
            except Exception as exc:
                raise BundleError(str(exc), f"runs.{key}.sample[scale={scale:g}]") from exc
            if scale == config.default_scale:
                default_trajectories[key] = trajectory
            try:
                thumbnails = [
                    _thumbnail(latent, decoder, config) for latent in trajectory.latents
                ]
            except Exception as exc:
                raise BundleError(str(exc), f"runs.{key}.imaging[scale={scale:g}]") from exc
            final = final_images.get(key, thumbnails[-1])
            variants[f"{scale:g}"] = {
                "thumbnails": [_b64(t) for t in thumbnails],
                "final_image": _b64(final),
            }
        runs[key] = {"variants": variants}
        if config.include_latents:
            runs[key]["latents"] = _b64(
                tensorio.tensor_bytes(default_trajectories[key].as_array())
            )

    # text/image linkage: pooled text projections against final latents,
    # both unit-normalized, at the default scale
    linkage: dict = {"keys": list(catalog), "matrix": []}
    if catalog:
        latent_size = int(np.prod(config.latent_shape))
        text_vectors = [
            unit_vector(
                pooled_projection(encode(sequences[key], encoder, key), latent_size)
            )
            for key in catalog
        ]
        image_vectors = [
            unit_vector(default_trajectories[key].latents[-1].data) for key in catalog
        ]
        matrix = linkage_matrix(text_vectors, image_vectors)
        linkage["matrix"] = [
            [_round6(float(value)) for value in row] for row in matrix
        ]

    params = LayoutParams(
        n_neighbors=config.projection_neighbors,
        min_dist=config.projection_min_dist,
        epochs=config.projection_epochs,
    ).resolved()
    projections = []
    seen_pairs = set()
    for entry in prompts:
        if entry.pair_key is None:
            continue
        pair = tuple(sorted((entry.key, entry.pair_key)))
        if pair in seen_pairs:
            continue
        seen_pairs.add(pair)
        try:
            polylines = project_trajectories(
                [default_trajectories[pair[0]], default_trajectories[pair[1]]],
                list(pair),
                params,
                seed=config.seed,
            )
        except Exception as exc:
            raise BundleError(str(exc), f"projections.{pair[0]}|{pair[1]}") from exc
        projections.append(
            {
                "pair": list(pair),
                "polylines": {
                    key: [[_round6(float(x)), _round6(float(y))] for x, y in line]
                    for key, line in polylines.items()
                },
            }
        )

    metadata = {
        "seed": config.seed,
        "schedule": schedule.metadata(),
        "encoder": encoder.name,
        "predictor": predictor.name,
        "embed_dim": config.embed_dim,
        "default_scale": config.default_scale,
        "guidance_scales": list(config.guidance_scales),
        "latent_shape": list(config.latent_shape),
        "projection": {**params.metadata(), "seed": config.seed},
        "thumbnail": {"size": config.thumbnail_size, "mode": config.thumbnail_mode},
        "linkage": linkage,
    }
    bundle = ExplainerBundle(
        version=BUNDLE_VERSION,
        metadata=metadata,
        prompts=prompts,
        runs=runs,
        projections=projections,
    )
    validate_document(bundle_document(bundle))
    return bundle


def bundle_document(bundle: ExplainerBundle) -> dict:
    return {
        "version": bundle.version,
        "metadata": bundle.metadata,
        "prompts": [
            {
                "key": p.key,
                "text": p.text,
                "pair_key": p.pair_key,
                "keywords_diff": [list(span) for span in p.keywords_diff],
                "tokens": {
                    "ids": list(p.token_ids),
                    "strings": list(p.token_strings),
                    "spans": [list(span) for span in p.token_spans],
                },
            }
            for p in bundle.prompts
        ],
        "runs": bundle.runs,
        "projections": bundle.projections,
    }


def _bundle_from_document(doc: dict) -> ExplainerBundle:
    prompts = [
        PromptEntry(
            key=p["key"],
            text=p["text"],
            pair_key=p["pair_key"],
            keywords_diff=tuple(tuple(span) for span in p["keywords_diff"]),
            token_ids=tuple(p["tokens"]["ids"]),
            token_strings=tuple(p["tokens"]["strings"]),
            token_spans=tuple(tuple(span) for span in p["tokens"]["spans"]),
        )
        for p in doc["prompts"]
    ]
    return ExplainerBundle(
        version=doc["version"],
        metadata=doc["metadata"],
        prompts=prompts,
        runs=doc["runs"],
        projections=doc["projections"],
    )


def save_bundle(bundle: ExplainerBundle) -> bytes:
    """Canonical serialization: sorted keys, compact separators, UTF-8."""
    doc = bundle_document(bundle)
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode(
        "utf-8"
    )


def load_bundle(source: bytes | str | Path) -> ExplainerBundle:
    if isinstance(source, (str, Path)):
        raw = Path(source).read_bytes()
    else:
        raw = source
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise BundleError(f"not a JSON document: {exc}") from exc
    validate_document(doc)
    return _bundle_from_document(doc)


def _schema() -> dict:
    raw = (resources.files("difftrace.data") / "bundle.schema.json").read_bytes()
    return json.loads(raw)


def _check_png_field(value: str, path: str) -> None:
    try:
        data = base64.b64decode(value.encode("ascii"), validate=True)
    except Exception as exc:
        raise BundleError(f"base64 decode failed: {exc}", path) from exc
    if not data.startswith(PNG_SIGNATURE):
        raise BundleError("payload is not a PNG stream", path)


def validate_document(doc: dict) -> None:
    """Schema plus referential, counting, and payload checks; errors carry the
    offending field path."""
    if not isinstance(doc, dict):
        raise BundleError("bundle must be a JSON object")
    version = doc.get("version")
    if version != BUNDLE_VERSION:
        raise BundleError(f"unsupported bundle version {version!r}", "version")
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        raise BundleError(exc.message, exc.json_path) from exc

    metadata = doc["metadata"]
    steps = metadata["schedule"]["inference_steps"]
    scales = metadata["guidance_scales"]
    if metadata["default_scale"] not in scales:
        raise BundleError("default scale missing from guidance scales", "metadata")

    keys = [p["key"] for p in doc["prompts"]]
    if len(set(keys)) != len(keys):
        raise BundleError("prompt keys are not unique", "prompts")
    by_key = {p["key"]: p for p in doc["prompts"]}

    for p in doc["prompts"]:
        path = f"prompts.{p['key']}"
        pair_key = p["pair_key"]
        if pair_key is not None:
            if pair_key not in by_key:
                raise BundleError(f"pair key {pair_key!r} does not resolve", path)
            if by_key[pair_key]["pair_key"] != p["key"]:
                raise BundleError(f"pair relation with {pair_key!r} is not symmetric", path)
            if by_key[pair_key]["tokens"]["ids"] == p["tokens"]["ids"]:
                raise BundleError(
                    f"paired prompts {p['key']!r} and {pair_key!r} share all tokens", path
                )

    for key in keys:
        if key not in doc["runs"]:
            raise BundleError(f"no run recorded for prompt {key!r}", f"runs.{key}")
    for key, run in doc["runs"].items():
        if key not in by_key:
            raise BundleError(f"run for unknown prompt {key!r}", f"runs.{key}")
        variants = run["variants"]
        present = sorted(float(s) for s in variants)
        if present != sorted(float(s) for s in scales):
            raise BundleError(
                f"variant scales {present} != declared {sorted(scales)}",
                f"runs.{key}.variants",
            )
        for scale_key, variant in variants.items():
            vpath = f"runs.{key}.variants.{scale_key}"
            if len(variant["thumbnails"]) != steps + 1:
                raise BundleError(
                    f"{len(variant['thumbnails'])} thumbnails for {steps + 1} steps",
                    f"{vpath}.thumbnails",
                )
            for idx, thumb in enumerate(variant["thumbnails"]):
                _check_png_field(thumb, f"{vpath}.thumbnails[{idx}]")
            _check_png_field(variant["final_image"], f"{vpath}.final_image")

    for index, projection in enumerate(doc["projections"]):
        path = f"projections[{index}]"
        pair = projection["pair"]
        for key in pair:
            if key not in by_key:
                raise BundleError(f"projection references unknown key {key!r}", path)
            if key not in projection["polylines"]:
                raise BundleError(f"no polyline for {key!r}", path)
        for key, line in projection["polylines"].items():
            if len(line) != steps + 1:
                raise BundleError(
                    f"polyline for {key!r} has {len(line)} points, wanted {steps + 1}",
                    path,
                )
        first, second = pair
        p0 = projection["polylines"][first][0]
        p1 = projection["polylines"][second][0]
        if p0 != p1:
            raise BundleError(
                f"paired step-0 points differ: {p0} vs {p1}", path
            )
