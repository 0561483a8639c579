"""Core value types, color math, and the `.brp` patch container.

Pixels live as float32 arrays in [0, 1] with shape (3, height, width).
Heavier math runs in float64 internally and is cast back to float32, so the
stored values stay within a cast rounding error of the exact result.
8-bit quantization happens only at the PNG boundary.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from .errors import (
    CorruptHeaderError,
    DomainError,
    MetadataError,
    PayloadLengthError,
    PngFormatError,
)

MAGIC = b"BRPATCH1"
DEFAULT_CREATED = "1970-01-01T00:00:00Z"
DEFAULT_HIST_BINS = 64

_META_KEYS = (
    "channels",
    "height",
    "width",
    "target_class",
    "lambda",
    "brightness_range",
    "seed",
    "source_model_id",
    "epochs_trained",
    "created",
)


def _as_pixels(arr, name: str = "pixels") -> np.ndarray:
    """Validate a (3, H, W) array in [0, 1] and return it as float32."""
    a = np.asarray(arr)
    if a.ndim != 3 or a.shape[0] != 3 or a.shape[1] < 1 or a.shape[2] < 1:
        raise DomainError(f"{name} must have shape (3, H>=1, W>=1), got {a.shape}")
    if not np.isfinite(a).all():
        raise DomainError(f"{name} contains non-finite values")
    if a.min() < -1e-9 or a.max() > 1 + 1e-9:
        raise DomainError(f"{name} values must lie in [0, 1]")
    return np.clip(a.astype(np.float32, copy=True), 0.0, 1.0)


@dataclass(frozen=True)
class PatchMeta:
    """Training/provenance metadata carried with a patch."""

    target_class: int = -1
    lambda_: float = 0.0
    brightness_range: float = 0.0
    seed: int = 0
    source_model_id: str = ""
    epochs_trained: int = 0
    created: str = DEFAULT_CREATED

    def __post_init__(self):
        if self.lambda_ < 0:
            raise DomainError("lambda must be nonnegative")
        if not (0.0 <= self.brightness_range <= 1.0):
            raise DomainError("brightness_range must lie in [0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "target_class": int(self.target_class),
            "lambda": float(self.lambda_),
            "brightness_range": float(self.brightness_range),
            "seed": int(self.seed),
            "source_model_id": str(self.source_model_id),
            "epochs_trained": int(self.epochs_trained),
            "created": str(self.created),
        }


@dataclass(frozen=True)
class Patch:
    """An attack patch: (3, H, W) float32 pixels in [0, 1] plus metadata.

    Immutable after construction; operations return new patches.
    """

    pixels: np.ndarray
    meta: PatchMeta = field(default_factory=PatchMeta)

    def __post_init__(self):
        object.__setattr__(self, "pixels", _as_pixels(self.pixels, "patch pixels"))
        self.pixels.setflags(write=False)

    @property
    def height(self) -> int:
        return self.pixels.shape[1]

    @property
    def width(self) -> int:
        return self.pixels.shape[2]

    def with_pixels(self, pixels) -> "Patch":
        """New patch with the same meta but fresh pixels (brightness_range remeasured)."""
        p = Patch(pixels, self.meta)
        rng = brightness_stats(p).range
        return Patch(p.pixels, replace(self.meta, brightness_range=float(rng)))

    def ident(self) -> str:
        """Short content digest used as patch_id in reports."""
        import hashlib

        return hashlib.sha256(self.pixels.tobytes()).hexdigest()[:12]


@dataclass(frozen=True)
class ImageBatch:
    """A batch of images (N, 3, H, W) in [0, 1] with optional true labels."""

    pixels: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        a = np.asarray(self.pixels)
        if a.ndim != 4 or a.shape[1] != 3:
            raise DomainError(f"image batch must have shape (N, 3, H, W), got {a.shape}")
        if a.size and (a.min() < -1e-9 or a.max() > 1 + 1e-9):
            raise DomainError("image values must lie in [0, 1]")
        object.__setattr__(self, "pixels", np.clip(a.astype(np.float32, copy=True), 0.0, 1.0))
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (a.shape[0],):
                raise DomainError("labels must be a 1-D array of length N")
            if lab.size and lab.min() < 0:
                raise DomainError("labels must be nonnegative class indices")
            object.__setattr__(self, "labels", lab)
        self.pixels.setflags(write=False)

    def __len__(self) -> int:
        return self.pixels.shape[0]

    @property
    def image_hw(self) -> tuple[int, int]:
        return self.pixels.shape[2], self.pixels.shape[3]

    def subset(self, indices) -> "ImageBatch":
        idx = np.asarray(indices, dtype=np.int64)
        lab = self.labels[idx] if self.labels is not None else None
        return ImageBatch(self.pixels[idx], lab)


@dataclass(frozen=True)
class BrightnessStats:
    """Per-patch HSB-brightness summary: extrema, range, and histogram."""

    min_b: float
    max_b: float
    range: float
    histogram: np.ndarray
    bin_edges: np.ndarray


def pixel_brightness(rgb) -> float:
    """HSB brightness of one RGB triple: max of the three components."""
    r, g, b = (float(v) for v in rgb)
    for v in (r, g, b):
        if not (0.0 <= v <= 1.0):
            raise DomainError(f"RGB component {v} outside [0, 1]")
    return max(r, g, b)


def brightness_map(pixels: np.ndarray) -> np.ndarray:
    """Per-pixel HSB brightness (channel max) of a (3, H, W) array."""
    return np.max(pixels, axis=0)


def brightness_stats(patch: Patch | np.ndarray, bins: int = DEFAULT_HIST_BINS) -> BrightnessStats:
    """Brightness extrema plus a histogram over uniform bins of [0, 1].

    The last bin is right-closed, so a pure white pixel lands in the top bin
    and the histogram always totals H*W.
    """
    if bins < 1:
        raise DomainError("bins must be >= 1")
    pixels = patch.pixels if isinstance(patch, Patch) else _as_pixels(patch)
    b = brightness_map(pixels.astype(np.float64))
    hist, edges = np.histogram(b, bins=bins, range=(0.0, 1.0))
    mn = float(b.min())
    mx = float(b.max())
    return BrightnessStats(min_b=mn, max_b=mx, range=mx - mn, histogram=hist, bin_edges=edges)


def mse(a, b) -> float:
    """Mean squared difference over every element of two same-shape arrays."""
    aa = np.asarray(a, dtype=np.float64)
    bb = np.asarray(b, dtype=np.float64)
    if aa.shape != bb.shape:
        raise DomainError(f"shape mismatch: {aa.shape} vs {bb.shape}")
    d = aa - bb
    return float(np.mean(d * d))


def white_like(patch: Patch | np.ndarray) -> np.ndarray:
    """All-white reference array with the same shape as the given patch."""
    pixels = patch.pixels if isinstance(patch, Patch) else np.asarray(patch)
    return np.ones_like(pixels, dtype=np.float32)


# ---------------------------------------------------------------------------
# .brp container
#
# Layout: 8-byte magic "BRPATCH1", little-endian u32 metadata length, UTF-8
# JSON metadata, then channels*height*width little-endian float32 in
# channel-major row-major order.
# ---------------------------------------------------------------------------


def save_patch(patch: Patch, path) -> None:
    meta = {
        "channels": 3,
        "height": int(patch.height),
        "width": int(patch.width),
        **patch.meta.to_json_dict(),
    }
    blob = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(patch.pixels, dtype="<f4").tobytes())


_META_TYPES = {
    "channels": int,
    "height": int,
    "width": int,
    "target_class": int,
    "seed": int,
    "epochs_trained": int,
    "lambda": (int, float),
    "brightness_range": (int, float),
    "source_model_id": str,
    "created": str,
}


def _parse_meta(blob: bytes) -> dict:
    try:
        meta = json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MetadataError(f"metadata parse failure: {exc}") from exc
    if not isinstance(meta, dict):
        raise MetadataError("metadata must be a JSON object")
    missing = [k for k in _META_KEYS if k not in meta]
    unknown = [k for k in meta if k not in _META_KEYS]
    if missing or unknown:
        raise MetadataError(f"metadata keys wrong (missing={missing}, unknown={unknown})")
    for key, typ in _META_TYPES.items():
        val = meta[key]
        if isinstance(val, bool) or not isinstance(val, typ):
            raise MetadataError(f"metadata key {key!r} has wrong type {type(val).__name__}")
    if meta["channels"] != 3:
        raise MetadataError(f"unsupported channel count {meta['channels']}")
    if meta["height"] < 1 or meta["width"] < 1:
        raise MetadataError("height and width must be >= 1")
    return meta


def load_patch(path) -> Patch:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(MAGIC) + 4 or raw[: len(MAGIC)] != MAGIC:
        raise CorruptHeaderError("bad magic or truncated header")
    (meta_len,) = struct.unpack_from("<I", raw, len(MAGIC))
    off = len(MAGIC) + 4
    if len(raw) < off + meta_len:
        raise CorruptHeaderError("truncated metadata block")
    meta = _parse_meta(raw[off : off + meta_len])
    off += meta_len
    n = meta["channels"] * meta["height"] * meta["width"]
    payload = raw[off:]
    if len(payload) != 4 * n:
        raise PayloadLengthError(
            f"payload length mismatch: expected {4 * n} bytes for "
            f"{meta['channels']}x{meta['height']}x{meta['width']}, got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype="<f4").reshape(
        meta["channels"], meta["height"], meta["width"]
    )
    return Patch(
        pixels,
        PatchMeta(
            target_class=meta["target_class"],
            lambda_=float(meta["lambda"]),
            brightness_range=float(meta["brightness_range"]),
            seed=meta["seed"],
            source_model_id=meta["source_model_id"],
            epochs_trained=meta["epochs_trained"],
            created=meta["created"],
        ),
    )


# ---------------------------------------------------------------------------
# PNG export / import (print-ready 8-bit RGB)
# ---------------------------------------------------------------------------


def quantize8(pixels: np.ndarray) -> np.ndarray:
    """[0,1] float -> uint8 via round-half-away-from-zero on v*255."""
    v = np.asarray(pixels, dtype=np.float64) * 255.0
    return np.clip(np.floor(v + 0.5), 0, 255).astype(np.uint8)


def export_png(patch: Patch, path) -> None:
    arr = quantize8(patch.pixels)
    Image.fromarray(np.transpose(arr, (1, 2, 0)), mode="RGB").save(path, format="PNG")


def _check_png_header(path) -> None:
    # IHDR layout: 8-byte signature, 4-byte length, 4-byte "IHDR",
    # width(4) height(4) bitdepth(1) colortype(1). Truecolor 8-bit means
    # bitdepth 8, colortype 2.
    with open(path, "rb") as fh:
        head = fh.read(26)
    if len(head) < 26 or head[:8] != b"\x89PNG\r\n\x1a\n" or head[12:16] != b"IHDR":
        raise PngFormatError("not a PNG file")
    bitdepth, colortype = head[24], head[25]
    if bitdepth != 8 or colortype != 2:
        raise PngFormatError(
            f"need 8-bit 3-channel PNG, got bit depth {bitdepth} color type {colortype}"
        )


def import_png(path) -> Patch:
    _check_png_header(path)
    try:
        img = Image.open(path)
        img.load()
    except OSError as exc:
        raise PngFormatError(f"cannot decode PNG: {exc}") from exc
    if img.mode != "RGB":
        raise PngFormatError(f"need RGB PNG, got mode {img.mode}")
    arr = np.transpose(np.asarray(img, dtype=np.float64) / 255.0, (2, 0, 1))
    p = Patch(arr.astype(np.float32))
    return Patch(p.pixels, replace(p.meta, brightness_range=float(brightness_stats(p).range)))
