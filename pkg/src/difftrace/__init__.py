"""Data engine for an interactive text-to-image diffusion explainer.

Pipeline: tokenize a prompt, encode it into per-token vectors, iteratively
refine an initial noise latent under classifier-free guidance while recording
every step, image the latents with a linear decoder, embed paired-prompt
trajectories in 2-D, and package everything into a bundle the companion UI
loads as a single JSON document.
"""

from .bundle import (
    BundleConfig,
    BundleError,
    ExplainerBundle,
    PromptEntry,
    build_bundle,
    load_bundle,
    save_bundle,
    validate_document,
)
from .latent_imaging import (
    LinearDecoder,
    RgbImage,
    decode_linear,
    decode_values,
    fit_decoder,
    load_decoder,
    png_bytes,
    upscale,
)
from .projection import (
    Embedding2D,
    FuzzyGraph,
    LayoutParams,
    PointSet,
    embed_points,
    fit_ab,
    fuzzy_graph,
    knn,
    layout,
    project_trajectories,
)
from .sampler import (
    GuidanceConfig,
    IngestedNoisePredictor,
    SyntheticNoisePredictor,
    Trajectory,
    guide,
    load_trajectory,
    predict_noise,
    run_trajectory,
    save_trajectory,
    unconditional_representation,
)
from .scheduler import (
    LatentTensor,
    NoiseSchedule,
    build_schedule,
    initial_noise,
    step,
)
from .tensorio import read_tensor, read_tensor_with_header, write_tensor
from .text_encoding import (
    IngestedTextEncoder,
    JointEmbedding,
    SyntheticTextEncoder,
    TextRepresentation,
    encode,
    linkage_matrix,
    similarity,
)
from .tokenizer import (
    TokenSequence,
    Vocabulary,
    detokenize,
    load_default_vocabulary,
    load_vocabulary,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "BundleConfig",
    "BundleError",
    "Embedding2D",
    "ExplainerBundle",
    "FuzzyGraph",
    "GuidanceConfig",
    "IngestedNoisePredictor",
    "IngestedTextEncoder",
    "JointEmbedding",
    "LatentTensor",
    "LayoutParams",
    "LinearDecoder",
    "NoiseSchedule",
    "PointSet",
    "PromptEntry",
    "RgbImage",
    "SyntheticNoisePredictor",
    "SyntheticTextEncoder",
    "TextRepresentation",
    "TokenSequence",
    "Trajectory",
    "Vocabulary",
    "build_bundle",
    "build_schedule",
    "decode_linear",
    "decode_values",
    "detokenize",
    "embed_points",
    "encode",
    "fit_ab",
    "fit_decoder",
    "fuzzy_graph",
    "guide",
    "initial_noise",
    "knn",
    "layout",
    "linkage_matrix",
    "load_bundle",
    "load_decoder",
    "load_default_vocabulary",
    "load_trajectory",
    "load_vocabulary",
    "png_bytes",
    "predict_noise",
    "project_trajectories",
    "read_tensor",
    "read_tensor_with_header",
    "run_trajectory",
    "save_bundle",
    "save_trajectory",
    "similarity",
    "step",
    "tokenize",
    "unconditional_representation",
    "upscale",
    "validate_document",
    "write_tensor",
]
