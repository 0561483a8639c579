"""Patch placement and differentiable compositing.

A transform is (center, rotation, scale). Geometry uses half-pixel centers:
pixel (r, c) occupies the unit square [c, c+1) x [r, r+1) with its center at
(c+0.5, r+0.5), and a placed patch of size (ph, pw) at scale s covers an
s*pw by s*ph rectangle around the center. The footprint therefore aligns to
the pixel grid (exact copy-paste, no resampling) whenever angle=0, scale=1
and cx - pw/2, cy - ph/2 are integers; for even patch sizes that is simply
an integer center.

Compositing warps the patch with bilinear resampling and zero padding; the
coverage mask is the same warp applied to an all-ones patch, which yields
fractional weights on partially covered border pixels. The composed image is
linear in the patch pixels, so the adjoint (`warp_vjp`) gives exact
gradients for the trainer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Patch
from .errors import DomainError, InfeasibleTransformError

PLACEMENT_UNIFORM = "uniform_interior"
PLACEMENT_FIXED = "fixed"


@dataclass(frozen=True)
class TransformSample:
    """One draw of placement center (image pixel coords), rotation, scale."""

    cx: float
    cy: float
    angle_deg: float
    scale: float


@dataclass(frozen=True)
class TransformConfig:
    angle_range_deg: tuple[float, float] = (-22.5, 22.5)
    scale_range: tuple[float, float] = (1.0, 1.0)
    placement: str = PLACEMENT_UNIFORM
    center: tuple[float, float] | None = None

    def __post_init__(self):
        a0, a1 = self.angle_range_deg
        s0, s1 = self.scale_range
        if a1 < a0:
            raise DomainError("angle range must be ordered")
        if s0 <= 0 or s1 < s0:
            raise DomainError("scale range must be positive and ordered")
        if self.placement not in (PLACEMENT_UNIFORM, PLACEMENT_FIXED):
            raise DomainError(f"unknown placement {self.placement!r}")
        if self.placement == PLACEMENT_FIXED and self.center is None:
            raise DomainError("fixed placement requires a center")

    def to_json_dict(self) -> dict:
        d = {
            "angle_range_deg": [float(self.angle_range_deg[0]), float(self.angle_range_deg[1])],
            "scale_range": [float(self.scale_range[0]), float(self.scale_range[1])],
            "placement": self.placement,
        }
        if self.center is not None:
            d["center"] = [float(self.center[0]), float(self.center[1])]
        return d


def _half_extents(ph: int, pw: int, angle_deg: float, scale: float) -> tuple[float, float]:
    """Half width/height of the axis-aligned box around the rotated footprint."""
    th = math.radians(angle_deg)
    c, s = abs(math.cos(th)), abs(math.sin(th))
    return 0.5 * scale * (pw * c + ph * s), 0.5 * scale * (pw * s + ph * c)


def _worst_half_extents(
    ph: int, pw: int, angle_range: tuple[float, float], scale: float
) -> tuple[float, float]:
    """Max footprint box over an angle interval (caps at the diagonal circle)."""
    a0, a1 = angle_range
    cands = {a0, a1}
    # Critical angles of pw*|cos|+ph*|sin| and pw*|sin|+ph*|cos|, repeated
    # every 90 degrees, plus the quadrant boundaries themselves.
    crit_x = math.degrees(math.atan2(ph, pw))
    crit_y = math.degrees(math.atan2(pw, ph))
    k0 = math.floor(a0 / 90.0) - 1
    k1 = math.ceil(a1 / 90.0) + 1
    for k in range(k0, k1 + 1):
        for base in (0.0, crit_x, crit_y, -crit_x, -crit_y):
            a = base + 90.0 * k
            if a0 <= a <= a1:
                cands.add(a)
    ex = ey = 0.0
    for a in cands:
        hx, hy = _half_extents(ph, pw, a, scale)
        ex = max(ex, hx)
        ey = max(ey, hy)
    return ex, ey


def check_feasible(
    cfg: TransformConfig, image_hw: tuple[int, int], patch_hw: tuple[int, int]
) -> None:
    """Raise unless every transform this config can draw fits in the image."""
    H, W = image_hw
    ph, pw = patch_hw
    ex, ey = _worst_half_extents(ph, pw, cfg.angle_range_deg, cfg.scale_range[1])
    if cfg.placement == PLACEMENT_FIXED:
        cx, cy = cfg.center
        ok = ex <= cx <= W - ex and ey <= cy <= H - ey
    else:
        ok = 2 * ex <= W and 2 * ey <= H
    if not ok:
        raise InfeasibleTransformError(
            f"patch {ph}x{pw} (scale up to {cfg.scale_range[1]}, angles "
            f"{cfg.angle_range_deg}) cannot fit inside a {H}x{W} image"
        )


def sample_transform(
    rng: np.random.Generator,
    cfg: TransformConfig,
    image_hw: tuple[int, int],
    patch_hw: tuple[int, int],
) -> TransformSample:
    """Draw one placement/rotation/scale.

    Draw order is fixed (angle, scale, cx, cy) so a seeded generator gives
    the same sample everywhere. Centers are uniform over every position that
    keeps the drawn footprint fully inside the image.
    """
    check_feasible(cfg, image_hw, patch_hw)
    H, W = image_hw
    ph, pw = patch_hw
    angle = float(rng.uniform(*cfg.angle_range_deg))
    scale = float(rng.uniform(*cfg.scale_range))
    if cfg.placement == PLACEMENT_FIXED:
        cx, cy = (float(v) for v in cfg.center)
    else:
        ex, ey = _half_extents(ph, pw, angle, scale)
        cx = float(rng.uniform(ex, W - ex))
        cy = float(rng.uniform(ey, H - ey))
    return TransformSample(cx=cx, cy=cy, angle_deg=angle, scale=scale)


class WarpPlan:
    """Precomputed bilinear gather for one (patch shape, image shape, transform).

    Holds, for every image pixel in the footprint's bounding box, the four
    patch-pixel indices and weights that feed it. `apply` runs the forward
    composite; `vjp` scatters an output-gradient back onto patch pixels.
    """

    def __init__(self, patch_hw: tuple[int, int], image_hw: tuple[int, int], t: TransformSample):
        ph, pw = patch_hw
        H, W = image_hw
        if t.scale <= 0:
            raise DomainError("scale must be positive")
        ex, ey = _half_extents(ph, pw, t.angle_deg, t.scale)
        if not (ex - 1e-6 <= t.cx <= W - ex + 1e-6 and ey - 1e-6 <= t.cy <= H - ey + 1e-6):
            raise InfeasibleTransformError(
                f"transform center ({t.cx:.2f}, {t.cy:.2f}) puts the footprint outside "
                f"the {H}x{W} image"
            )
        # Bounding box padded so the one-source-pixel soft edge is included.
        pad = t.scale + 1.0
        c0 = max(0, int(math.floor(t.cx - ex - pad)))
        c1 = min(W, int(math.ceil(t.cx + ex + pad)))
        r0 = max(0, int(math.floor(t.cy - ey - pad)))
        r1 = min(H, int(math.ceil(t.cy + ey + pad)))
        self.patch_hw = (ph, pw)
        self.image_hw = (H, W)
        self.bbox = (r0, r1, c0, c1)

        th = math.radians(t.angle_deg)
        cos_t, sin_t = math.cos(th), math.sin(th)
        xs = np.arange(c0, c1, dtype=np.float64) + 0.5 - t.cx
        ys = np.arange(r0, r1, dtype=np.float64) + 0.5 - t.cy
        X, Y = np.meshgrid(xs, ys)
        # Inverse rotate/scale into patch pixel-index space.
        u = (cos_t * X + sin_t * Y) / t.scale + pw / 2.0 - 0.5
        v = (-sin_t * X + cos_t * Y) / t.scale + ph / 2.0 - 0.5
        j0 = np.floor(u).astype(np.int64)
        i0 = np.floor(v).astype(np.int64)
        fu = u - j0
        fv = v - i0
        w00 = (1.0 - fu) * (1.0 - fv)
        w01 = fu * (1.0 - fv)
        w10 = (1.0 - fu) * fv
        w11 = fu * fv
        self._taps = []
        for di, dj, w in ((0, 0, w00), (0, 1, w01), (1, 0, w10), (1, 1, w11)):
            ii = i0 + di
            jj = j0 + dj
            valid = (ii >= 0) & (ii < ph) & (jj >= 0) & (jj < pw)
            w = np.where(valid, w, 0.0)
            self._taps.append((np.clip(ii, 0, ph - 1), np.clip(jj, 0, pw - 1), w))
        self.mask_box = sum(w for _, _, w in self._taps)

    def warp(self, patch_pixels: np.ndarray) -> np.ndarray:
        """Coverage-weighted warped patch over the bounding box, (3, bh, bw)."""
        p = np.asarray(patch_pixels, dtype=np.float64)
        out = np.zeros((3,) + self.mask_box.shape, dtype=np.float64)
        for ii, jj, w in self._taps:
            out += p[:, ii, jj] * w
        return out

    def apply(self, image: np.ndarray, patch_pixels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Composite the patch over the image. Returns (composed, mask) float64.

        Pixels with zero coverage are bit-identical to the input image.
        """
        r0, r1, c0, c1 = self.bbox
        composed = np.asarray(image, dtype=np.float64).copy()
        mask = np.zeros(self.image_hw, dtype=np.float64)
        m = self.mask_box
        region = composed[:, r0:r1, c0:c1]
        blended = np.clip(self.warp(patch_pixels) + (1.0 - m) * region, 0.0, 1.0)
        covered = m > 0.0
        composed[:, r0:r1, c0:c1] = np.where(covered[None], blended, region)
        mask[r0:r1, c0:c1] = m
        return composed, mask

    def vjp(self, grad_composed: np.ndarray) -> np.ndarray:
        """Adjoint of `apply` in the patch pixels: scatter weights back."""
        r0, r1, c0, c1 = self.bbox
        g = np.asarray(grad_composed, dtype=np.float64)[:, r0:r1, c0:c1]
        ph, pw = self.patch_hw
        grad = np.zeros((3, ph, pw), dtype=np.float64)
        for ii, jj, w in self._taps:
            flat = (ii * pw + jj).ravel()
            wg = (w * g).reshape(3, -1)
            for ch in range(3):
                np.add.at(grad[ch].ravel(), flat, wg[ch])
        return grad

    def pixel_weights(self) -> np.ndarray:
        """Total resampling weight of every patch pixel (d sum(composed)/d patch)."""
        ph, pw = self.patch_hw
        out = np.zeros((ph, pw), dtype=np.float64)
        for ii, jj, w in self._taps:
            np.add.at(out.ravel(), (ii * pw + jj).ravel(), w.ravel())
        return out


def compose(
    image: np.ndarray, patch: Patch | np.ndarray, t: TransformSample
) -> tuple[np.ndarray, np.ndarray]:
    """Place `patch` onto `image` (3, H, W) under transform `t`.

    Returns (composed, mask): composed is (3, H, W) float64 in [0, 1]; mask
    is (H, W) coverage in [0, 1], fractional on partially covered border
    pixels and zero wherever the image is untouched.
    """
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[0] != 3:
        raise DomainError(f"image must have shape (3, H, W), got {img.shape}")
    pixels = patch.pixels if isinstance(patch, Patch) else np.asarray(patch)
    plan = WarpPlan(pixels.shape[1:], img.shape[1:], t)
    return plan.apply(img, pixels)
