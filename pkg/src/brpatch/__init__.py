"""Brightness-restricted adversarial patch toolkit."""

from .compositor import TransformConfig, TransformSample, compose, sample_transform
from .core import (
    BrightnessStats,
    ImageBatch,
    Patch,
    PatchMeta,
    brightness_stats,
    export_png,
    import_png,
    load_patch,
    mse,
    pixel_brightness,
    save_patch,
)
from .errors import BrPatchError, DomainError, InfeasibleTransformError
from .evaluate import EvalReport, SuiteConfig, brightness_report, evaluate_asr, robustness_table
from .losses import adv_loss, brightness_loss, total_loss
from .perturb import (
    HueMapParams,
    color_drift,
    color_transfer,
    gaussian_blur3,
    hue_map,
    resize_bilinear,
)
from .trainer import TrainConfig, TrainHistory, sweep_lambda, train_patch

__version__ = "0.1.0"

__all__ = [
    "BrightnessStats",
    "BrPatchError",
    "DomainError",
    "EvalReport",
    "HueMapParams",
    "ImageBatch",
    "InfeasibleTransformError",
    "Patch",
    "PatchMeta",
    "SuiteConfig",
    "TrainConfig",
    "TrainHistory",
    "TransformConfig",
    "TransformSample",
    "adv_loss",
    "brightness_loss",
    "brightness_report",
    "brightness_stats",
    "color_drift",
    "color_transfer",
    "compose",
    "evaluate_asr",
    "export_png",
    "gaussian_blur3",
    "hue_map",
    "import_png",
    "load_patch",
    "mse",
    "pixel_brightness",
    "resize_bilinear",
    "robustness_table",
    "sample_transform",
    "save_patch",
    "sweep_lambda",
    "total_loss",
    "train_patch",
]
