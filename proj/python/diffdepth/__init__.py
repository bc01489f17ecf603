"""Diffusion-based metric depth estimation on procedural RGB-D scenes."""

from ._core import (
    DataError,
    NumericError,
    UsageError,
    __version__,
    alpha_sigma,
    decode_depth,
    encode_depth,
    evaluate_depth,
    focal_from_fov,
    fov_from_focal,
    fov_to_cond,
    generate_dataset,
    infer,
    infill_depth,
    perturb_fov_cond,
    render_sample,
    train,
)

__all__ = [
    "DataError",
    "NumericError",
    "UsageError",
    "__version__",
    "alpha_sigma",
    "decode_depth",
    "encode_depth",
    "evaluate_depth",
    "focal_from_fov",
    "fov_from_focal",
    "fov_to_cond",
    "generate_dataset",
    "infer",
    "infill_depth",
    "perturb_fov_cond",
    "render_sample",
    "train",
]
