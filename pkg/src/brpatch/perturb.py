"""Deployment-time and robustness-study patch transforms.

All operations are pure: they take a patch, return a new patch (float32,
clipped to [0, 1], brightness_range remeasured), and never mutate inputs.
Arithmetic runs in float64 so results match a scalar reference to within a
float32 cast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Patch, brightness_stats
from .errors import DomainError
from .seeds import derive_rng

DEFAULT_HUE_THRESHOLD = 0.2

BLUR3_KERNEL = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]) / 16.0


@dataclass(frozen=True)
class HueMapParams:
    """Threshold and scene region for deployment-time hue mapping.

    `target_region` is the (3, h, w) crop of the scene the patch will sit
    beside. `literal_sign=True` shifts the patch by the raw patch-minus-scene
    channel difference instead of its negation (i.e. away from the scene
    mean); the default moves the patch toward the scene mean.
    """

    target_region: np.ndarray
    h_t: float = DEFAULT_HUE_THRESHOLD
    literal_sign: bool = False

    def __post_init__(self):
        if not (0.0 <= self.h_t <= 1.0):
            raise DomainError("hue threshold must lie in [0, 1]")
        region = np.asarray(self.target_region, dtype=np.float64)
        if region.ndim != 3 or region.shape[0] != 3 or region.shape[1] < 1 or region.shape[2] < 1:
            raise DomainError("target region must be a nonempty (3, h, w) array")
        if region.min() < -1e-9 or region.max() > 1 + 1e-9:
            raise DomainError("target region values must lie in [0, 1]")
        object.__setattr__(self, "target_region", region)


def _repack(patch: Patch, pixels64: np.ndarray) -> Patch:
    out = np.clip(pixels64, 0.0, 1.0).astype(np.float32)
    return patch.with_pixels(out) if isinstance(patch, Patch) else Patch(out)


def channel_means(pixels: np.ndarray) -> np.ndarray:
    return np.asarray(pixels, dtype=np.float64).reshape(3, -1).mean(axis=1)


def hue_map(patch: Patch, params: HueMapParams) -> Patch:
    """Shift each channel uniformly toward the scene's mean color.

    The per-channel shift is the patch-minus-scene mean difference, negated
    (unless literal_sign), clamped symmetrically to [-h_t, +h_t]. Texture is
    preserved exactly: every pixel of a channel receives the same shift
    before the final clip to [0, 1].
    """
    p = patch.pixels.astype(np.float64)
    delta = channel_means(p) - channel_means(params.target_region)
    shift = delta if params.literal_sign else -delta
    shift = np.clip(shift, -params.h_t, params.h_t)
    return _repack(patch, p + shift[:, None, None])


def color_transfer(patch: Patch, delta: float) -> Patch:
    """Add one scalar to every channel value; texture is untouched.

    `delta` must not push any value outside [0, 1]; that is a hard
    precondition, never a silent clamp.
    """
    p = patch.pixels.astype(np.float64)
    lo = -float(p.min())
    hi = 1.0 - float(p.max())
    if not (lo - 1e-9 <= delta <= hi + 1e-9):
        raise DomainError(
            f"delta {delta} would overflow: admissible interval is [{lo:.6g}, {hi:.6g}]"
        )
    return _repack(patch, p + delta)


def gaussian_blur3(patch: Patch) -> Patch:
    """3x3 binomial Gaussian blur per channel, borders edge-replicated."""
    p = patch.pixels.astype(np.float64)
    if p.shape[1] < 3 or p.shape[2] < 3:
        raise DomainError("patch must be at least 3x3 to blur")
    padded = np.pad(p, ((0, 0), (1, 1), (1, 1)), mode="edge")
    out = np.zeros_like(p)
    for di in range(3):
        for dj in range(3):
            out += BLUR3_KERNEL[di, dj] * padded[:, di : di + p.shape[1], dj : dj + p.shape[2]]
    return _repack(patch, out)


def color_drift(patch: Patch, q: float, rng: np.random.Generator | int) -> Patch:
    """Multiply each element by (1+u), u ~ Uniform(-q, q) drawn per element.

    Draw order is the C order of the (3, H, W) array, so a given seed yields
    the same patch whether elements are processed serially or in parallel.
    """
    if not (0.0 <= q <= 1.0):
        raise DomainError("drift fraction q must lie in [0, 1]")
    gen = derive_rng(rng) if isinstance(rng, (int, np.integer)) else rng
    p = patch.pixels.astype(np.float64)
    u = gen.uniform(-q, q, size=p.shape)
    return _repack(patch, p * (1.0 + u))


def resize_bilinear(
    patch: Patch, new_h: int, new_w: int, align_corners: bool = False
) -> Patch:
    """Bilinear resample to (new_h, new_w).

    Default uses half-pixel-center source coordinates, which makes a
    same-size resize the exact identity. `align_corners=True` switches to
    corner-aligned coordinates (the lossier variant kept for comparison).
    """
    if new_h < 1 or new_w < 1:
        raise DomainError("target size must be positive")
    p = patch.pixels.astype(np.float64)
    h, w = p.shape[1], p.shape[2]

    def src_coords(n_out: int, n_in: int) -> np.ndarray:
        idx = np.arange(n_out, dtype=np.float64)
        if align_corners:
            if n_out == 1:
                return np.zeros(1)
            return idx * (n_in - 1) / (n_out - 1)
        return (idx + 0.5) * (n_in / n_out) - 0.5

    sy = src_coords(new_h, h)
    sx = src_coords(new_w, w)
    y0 = np.clip(np.floor(sy), 0, h - 1).astype(np.int64)
    x0 = np.clip(np.floor(sx), 0, w - 1).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = np.clip(sy - y0, 0.0, 1.0)[None, :, None]
    fx = np.clip(sx - x0, 0.0, 1.0)[None, None, :]
    top = p[:, y0][:, :, x0] * (1 - fx) + p[:, y0][:, :, x1] * fx
    bot = p[:, y1][:, :, x0] * (1 - fx) + p[:, y1][:, :, x1] * fx
    return _repack(patch, top * (1 - fy) + bot * fy)


def measured_range(patch: Patch) -> float:
    return float(brightness_stats(patch).range)
