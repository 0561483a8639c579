"""Labeled image sets for the desk-scale harness.

Two sources: an `.npz` file with train/test splits, or the built-in
procedurally generated 10-class shapes set (colored geometric figures with
randomized color, position, size, rotation, and pixel noise). Generation is
fully determined by the seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .core import ImageBatch
from .errors import DatasetError, DomainError
from .seeds import NS_DATASET, derive_rng

NUM_SHAPE_CLASSES = 10

SHAPE_NAMES = (
    "disk", "square", "triangle", "ring", "plus",
    "h_stripes", "v_stripes", "checker", "diamond", "x_cross",
)


@dataclass(frozen=True)
class DatasetSpec:
    """Where a dataset comes from: `npz` path or synthetic generator params."""

    kind: str = "synthetic"
    path: str | None = None
    seed: int = 0
    n_train: int = 3200
    n_test: int = 1600
    image_size: int = 48

    def __post_init__(self):
        if self.kind not in ("synthetic", "npz"):
            raise DomainError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "npz" and not self.path:
            raise DomainError("npz dataset needs a path")
        if self.kind == "synthetic" and (self.n_train < 1 or self.n_test < 1 or self.image_size < 8):
            raise DomainError("synthetic dataset sizes out of range")

    def to_json_dict(self) -> dict:
        if self.kind == "npz":
            return {"kind": "npz", "path": self.path}
        return {
            "kind": "synthetic",
            "seed": self.seed,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "image_size": self.image_size,
        }


@dataclass(frozen=True)
class Dataset:
    train: ImageBatch
    test: ImageBatch
    num_classes: int


def _shape_mask(cls: int, xx: np.ndarray, yy: np.ndarray, r: float,
                period: float, phase: float) -> np.ndarray:
    """Boolean inside-test for one shape class on centered rotated coords."""
    ax, ay = np.abs(xx), np.abs(yy)
    d = np.sqrt(xx * xx + yy * yy)
    if cls == 0:  # disk
        return d <= r
    if cls == 1:  # square
        return np.maximum(ax, ay) <= 0.85 * r
    if cls == 2:  # triangle, apex up
        return (yy >= -r) & (yy <= r) & (ax <= (yy + r) * 0.5)
    if cls == 3:  # ring
        return (d <= r) & (d >= 0.55 * r)
    if cls == 4:  # plus
        w = 0.3 * r
        return ((ax <= w) & (ay <= r)) | ((ay <= w) & (ax <= r))
    if cls == 5:  # horizontal stripes within a disk
        return (d <= r) & (np.mod(yy + phase, 2 * period) < period)
    if cls == 6:  # vertical stripes within a disk
        return (d <= r) & (np.mod(xx + phase, 2 * period) < period)
    if cls == 7:  # checkerboard within a disk
        return (d <= r) & (
            (np.mod(xx + phase, 2 * period) < period)
            ^ (np.mod(yy + phase, 2 * period) < period)
        )
    if cls == 8:  # diamond
        return ax + ay <= 1.2 * r
    if cls == 9:  # x cross
        w = 0.42 * r
        bars = (np.abs(xx - yy) <= w) | (np.abs(xx + yy) <= w)
        return bars & (np.maximum(ax, ay) <= r)
    raise DomainError(f"unknown shape class {cls}")


def _render_shape(cls: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """One sample: cluttered low-contrast background, one class shape, noise."""
    bg = rng.uniform(0.05, 0.55, size=3)
    fg = rng.uniform(0.35, 0.95, size=3)
    cx = size / 2 + rng.uniform(-0.16, 0.16) * size
    cy = size / 2 + rng.uniform(-0.16, 0.16) * size
    r = rng.uniform(0.17, 0.30) * size
    theta = np.radians(rng.uniform(-25.0, 25.0))
    period = rng.uniform(2.2, 4.0)
    phase = rng.uniform(0.0, 2 * period)

    img = np.broadcast_to(bg[:, None, None], (3, size, size)).copy()

    # Smooth illumination ramp in a random direction.
    gx, gy = np.meshgrid(np.linspace(-0.5, 0.5, size), np.linspace(-0.5, 0.5, size))
    gdir = rng.uniform(0.0, 2 * np.pi)
    img += rng.uniform(0.0, 0.3) * (np.cos(gdir) * gx + np.sin(gdir) * gy)[None]

    # Thin line-segment clutter, drawn under the shape.
    cols_1x = np.arange(size, dtype=np.float64) + 0.5
    px1, py1 = np.meshgrid(cols_1x, cols_1x)
    for _ in range(rng.integers(0, 4)):
        lx, ly = rng.uniform(0, size, size=2)
        ang = rng.uniform(0.0, np.pi)
        half_len = rng.uniform(4.0, 12.0)
        half_w = rng.uniform(0.6, 1.5)
        ca, sa = np.cos(ang), np.sin(ang)
        a = ca * (px1 - lx) + sa * (py1 - ly)
        b = -sa * (px1 - lx) + ca * (py1 - ly)
        seg = (np.abs(a) <= half_len) & (np.abs(b) <= half_w)
        img = np.where(seg[None], rng.uniform(0.0, 1.0, size=3)[:, None, None], img)

    # 2x2 supersampled inside-test for mildly antialiased shape edges.
    sub = np.array([0.25, 0.75])
    cols = (np.arange(size)[:, None] + sub[None, :]).ravel()
    px, py = np.meshgrid(cols, cols)
    dx, dy = px - cx, py - cy
    ct, st = np.cos(theta), np.sin(theta)
    xx = ct * dx + st * dy
    yy = -st * dx + ct * dy
    inside = _shape_mask(cls, xx, yy, r, period, phase)
    cover = inside.reshape(size, 2, size, 2).mean(axis=(1, 3))

    img = img + cover[None] * (fg[:, None, None] - img)
    img = img + rng.normal(0.0, rng.uniform(0.03, 0.08), size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def _generate_split(seed: int, tag: int, n: int, size: int) -> ImageBatch:
    pixels = np.empty((n, 3, size, size), dtype=np.float32)
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        cls = i % NUM_SHAPE_CLASSES
        rng = derive_rng(seed, NS_DATASET, tag, i)
        pixels[i] = _render_shape(cls, size, rng)
        labels[i] = cls
    return ImageBatch(pixels, labels)


def synthetic_dataset(seed: int, n_train: int, n_test: int, image_size: int) -> Dataset:
    """The built-in shapes set: balanced classes, deterministic in the seed."""
    return Dataset(
        train=_generate_split(seed, 0, n_train, image_size),
        test=_generate_split(seed, 1, n_test, image_size),
        num_classes=NUM_SHAPE_CLASSES,
    )


def save_dataset_npz(data: Dataset, path) -> None:
    np.savez_compressed(
        path,
        train_images=data.train.pixels,
        train_labels=data.train.labels,
        test_images=data.test.pixels,
        test_labels=data.test.labels,
    )


def load_dataset_npz(path) -> Dataset:
    if not os.path.exists(path):
        raise DatasetError(f"dataset missing: {path}")
    try:
        with np.load(path) as z:
            train = ImageBatch(z["train_images"], z["train_labels"])
            test = ImageBatch(z["test_images"], z["test_labels"])
    except (KeyError, ValueError, OSError) as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    labels = np.concatenate([train.labels, test.labels])
    return Dataset(train=train, test=test, num_classes=int(labels.max()) + 1)


def load_dataset(spec: DatasetSpec) -> Dataset:
    if spec.kind == "npz":
        return load_dataset_npz(spec.path)
    return synthetic_dataset(spec.seed, spec.n_train, spec.n_test, spec.image_size)
