"""Command-line entry points: tokenize, sample, project, bundle, validate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bundle import BundleConfig, build_bundle, load_bundle, save_bundle
from .projection import LayoutParams, project_trajectories
from .sampler import (
    GuidanceConfig,
    IngestedNoisePredictor,
    SyntheticNoisePredictor,
    load_trajectory,
    run_trajectory,
    save_trajectory,
    unconditional_representation,
)
from .scheduler import build_schedule
from .text_encoding import IngestedTextEncoder, SyntheticTextEncoder
from .tokenizer import load_default_vocabulary, load_vocabulary, token_strings, tokenize


def _load_vocab(args) -> object:
    if args.vocab or args.merges:
        if not (args.vocab and args.merges):
            raise SystemExit("--vocab and --merges must be given together")
        return load_vocabulary(
            Path(args.vocab).read_bytes(), Path(args.merges).read_bytes()
        )
    return load_default_vocabulary()


def _cmd_tokenize(args) -> int:
    vocab = _load_vocab(args)
    seq = tokenize(args.prompt, vocab)
    for index, (tid, string) in enumerate(zip(seq.ids, token_strings(seq, vocab))):
        print(f"{index}\t{tid}\t{string}")
    return 0


def _parse_plugin(spec: str, synthetic_cls, ingested_cls, **kwargs):
    if spec == "synthetic":
        return synthetic_cls(**kwargs)
    if spec.startswith("ingested:"):
        return ingested_cls(spec.split(":", 1)[1])
    raise SystemExit(f"unknown plugin spec {spec!r}; use synthetic or ingested:<dir>")


def _cmd_sample(args) -> int:
    vocab = _load_vocab(args)
    shape = tuple(int(x) for x in args.shape.split(","))
    if len(shape) != 3:
        raise SystemExit("--shape must be C,H,W")
    encoder = _parse_plugin(
        args.encoder, SyntheticTextEncoder, IngestedTextEncoder,
        seed=args.encoder_seed, embed_dim=args.embed_dim,
    )
    predictor = _parse_plugin(
        args.predictor, SyntheticNoisePredictor, IngestedNoisePredictor
    )
    schedule = build_schedule(num_inference_steps=args.steps)
    guidance = GuidanceConfig(
        scale=args.guidance,
        uncond_representation=unconditional_representation(vocab, encoder),
    )
    trajectory = run_trajectory(
        args.prompt, args.seed, schedule, vocab, encoder, predictor, guidance,
        key=args.key, latent_shape=shape,
    )
    save_trajectory(trajectory, args.out)
    print(
        f"wrote {args.out}: {len(trajectory)} latents of shape {shape}, "
        f"seed {args.seed}, scale {args.guidance:g}"
    )
    if args.thumbnails:
        from .latent_imaging import (
            decode_linear,
            generic_decoder,
            load_decoder,
            png_bytes,
            upscale,
        )

        out_dir = Path(args.thumbnails)
        out_dir.mkdir(parents=True, exist_ok=True)
        decoder = (
            load_decoder() if shape[0] == load_decoder().channels
            else generic_decoder(shape[0])
        )
        for index, latent in enumerate(trajectory.latents):
            img = decode_linear(latent, decoder)
            size = max(args.thumbnail_size, img.width)
            scaled = upscale(img, size, size, "nearest")
            (out_dir / f"step_{index:03d}.png").write_bytes(png_bytes(scaled))
        print(f"wrote {len(trajectory)} PNGs to {out_dir}")
    return 0


def _cmd_project(args) -> int:
    trajectories = [load_trajectory(path) for path in args.trajectories]
    ids = [Path(path).stem for path in args.trajectories]
    params = LayoutParams(
        n_neighbors=args.neighbors,
        min_dist=args.min_dist,
        epochs=args.epochs,
    )
    polylines = project_trajectories(trajectories, ids, params, seed=args.seed)
    payload = [
        {
            "trajectory_id": tid,
            "points": [[float(x), float(y)] for x, y in polylines[tid]],
        }
        for tid in ids
    ]
    Path(args.out).write_text(json.dumps(payload, indent=2))
    print(f"wrote {args.out}: {len(payload)} polylines")
    return 0


def _cmd_bundle(args) -> int:
    config = BundleConfig.from_json(args.config)
    if args.include_latents:
        config.include_latents = True
    bundle = build_bundle(config)
    data = save_bundle(bundle)
    Path(args.out).write_bytes(data)
    print(
        f"wrote {args.out}: {len(bundle.prompts)} prompts, "
        f"{len(bundle.projections)} projections, {len(data)} bytes"
    )
    return 0


def _cmd_validate(args) -> int:
    try:
        bundle = load_bundle(Path(args.bundle))
    except Exception as exc:
        print(f"INVALID: {exc}")
        return 1
    print(
        f"OK: version {bundle.version}, {len(bundle.prompts)} prompts, "
        f"{len(bundle.projections)} projections"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="difftrace",
        description="Trace and package text-guided latent refinement runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", help="print the token table for a prompt")
    p.add_argument("--prompt", required=True)
    p.add_argument("--vocab")
    p.add_argument("--merges")
    p.set_defaults(func=_cmd_tokenize)

    p = sub.add_parser("sample", help="run one guided refinement trajectory")
    p.add_argument("--prompt", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--guidance", type=float, default=7.0)
    p.add_argument("--predictor", default="synthetic")
    p.add_argument("--encoder", default="synthetic")
    p.add_argument("--encoder-seed", type=int, default=0)
    p.add_argument("--embed-dim", type=int, default=768)
    p.add_argument("--shape", default="4,64,64")
    p.add_argument("--key", default=None, help="prompt key for ingested packs")
    p.add_argument("--out", required=True)
    p.add_argument("--thumbnails", help="also write per-step PNGs to this directory")
    p.add_argument("--thumbnail-size", type=int, default=256)
    p.add_argument("--vocab")
    p.add_argument("--merges")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("project", help="embed trajectories into 2-D polylines")
    p.add_argument("--trajectories", nargs="+", required=True)
    p.add_argument("--neighbors", type=int, default=15)
    p.add_argument("--min-dist", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_project)

    p = sub.add_parser("bundle", help="build a full explainer bundle")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--include-latents", action="store_true")
    p.set_defaults(func=_cmd_bundle)

    p = sub.add_parser("validate", help="validate a bundle file")
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
