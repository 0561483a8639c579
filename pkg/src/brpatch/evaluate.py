"""Gray-box evaluation: attack success rate, robustness suites, reports.

For every evaluated image one transform is drawn from a per-image derived
seed, the patch is composited, and the backend's top-1 prediction is
compared with the target class. Images whose true label already equals the
target are excluded from numerator and denominator. Reports carry enough
per-image detail to recompute the headline number offline.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .backends import ClassifierBackend, validate_probs
from .compositor import TransformConfig, TransformSample, compose, sample_transform
from .core import BrightnessStats, ImageBatch, Patch, brightness_stats
from .errors import BackendError, DomainError
from .perturb import color_drift, color_transfer, gaussian_blur3, resize_bilinear
from .seeds import NS_DRIFT, NS_EVAL, derive_rng, derive_seed

_CHUNK = 128


@dataclass(frozen=True)
class PerImageResult:
    image_index: int
    transform: TransformSample
    predicted_class: int
    target_prob: float

    def to_json_dict(self) -> dict:
        t = self.transform
        return {
            "image_index": self.image_index,
            "transform": {"cx": t.cx, "cy": t.cy, "angle_deg": t.angle_deg, "scale": t.scale},
            "predicted_class": self.predicted_class,
            "target_prob": self.target_prob,
        }


@dataclass(frozen=True)
class EvalReport:
    patch_id: str
    target_class: int
    n_images: int
    n_success: int
    asr: float
    per_image: list[PerImageResult]
    config_snapshot: dict
    master_seed: int

    def to_json_dict(self) -> dict:
        return {
            "patch_id": self.patch_id,
            "target_class": self.target_class,
            "n_images": self.n_images,
            "n_success": self.n_success,
            "asr": self.asr,
            "per_image": [r.to_json_dict() for r in self.per_image],
            "config_snapshot": self.config_snapshot,
            "master_seed": self.master_seed,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")


def evaluate_asr(
    patch: Patch,
    images: ImageBatch,
    target_class: int,
    backend: ClassifierBackend,
    tcfg: TransformConfig,
    seed: int,
) -> EvalReport:
    """Targeted attack success rate of one patch on one backend.

    Deterministic in (patch, images, backend weights, seed): image i always
    receives the transform drawn from derive_rng(seed, image i).
    """
    if len(images) == 0:
        raise DomainError("need a nonempty image batch")
    if not (0 <= target_class < backend.num_classes):
        raise DomainError(f"target class {target_class} out of backend range")
    if images.labels is None:
        raise DomainError("evaluation images need true labels (target-class exclusion)")

    keep = np.flatnonzero(images.labels != target_class)
    if keep.size == 0:
        raise DomainError("every image already belongs to the target class")

    H, W = images.image_hw
    composed = np.empty((keep.size, 3, H, W), dtype=np.float32)
    transforms: list[TransformSample] = []
    for row, idx in enumerate(keep):
        rng = derive_rng(seed, NS_EVAL, int(idx))
        t = sample_transform(rng, tcfg, (H, W), (patch.height, patch.width))
        transforms.append(t)
        composed[row] = compose(images.pixels[idx], patch, t)[0]

    probs = np.empty((keep.size, backend.num_classes), dtype=np.float64)
    failures = 0
    for start in range(0, keep.size, _CHUNK):
        chunk = composed[start : start + _CHUNK]
        try:
            p = backend.predict(chunk)
        except Exception:
            # Isolate which images inside the chunk actually fail.
            p = np.full((len(chunk), backend.num_classes), np.nan)
            for j in range(len(chunk)):
                try:
                    p[j] = backend.predict(chunk[j : j + 1])[0]
                except Exception:
                    failures += 1
            if failures > max(1, keep.size // 100):
                raise BackendError(
                    f"backend failed on more than 1% of images ({failures} failures)"
                )
        probs[start : start + len(chunk)] = p
    validate_probs(probs[~np.isnan(probs).any(axis=1)], backend.num_classes)

    pred = np.where(np.isnan(probs).any(axis=1), -1, np.argmax(probs, axis=1))
    success = pred == target_class
    per_image = [
        PerImageResult(
            image_index=int(idx),
            transform=transforms[row],
            predicted_class=int(pred[row]),
            target_prob=float(probs[row, target_class]),
        )
        for row, idx in enumerate(keep)
    ]
    n = int(keep.size)
    n_success = int(success.sum())
    return EvalReport(
        patch_id=patch.ident(),
        target_class=int(target_class),
        n_images=n,
        n_success=n_success,
        asr=n_success / n,
        per_image=per_image,
        config_snapshot={
            "transform": tcfg.to_json_dict(),
            "backend": backend.model_id,
            "n_candidates": len(images),
        },
        master_seed=int(seed),
    )


# ---------------------------------------------------------------------------
# Robustness suite (perturb the patch, re-evaluate with paired seeds)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuiteConfig:
    """Which perturbed variants a robustness table includes."""

    color_transfer_delta: float = 0.05
    include_blur: bool = True
    drift_qs: tuple[float, ...] = (0.10, 0.15, 0.20)
    resize_factors: tuple[float, ...] = (1.2, 1.4, 1.6)
    include_original: bool = True
    include_transfer: bool = True

    def to_json_dict(self) -> dict:
        return {
            "color_transfer_delta": self.color_transfer_delta,
            "include_blur": self.include_blur,
            "drift_qs": list(self.drift_qs),
            "resize_factors": list(self.resize_factors),
            "include_original": self.include_original,
            "include_transfer": self.include_transfer,
        }


@dataclass(frozen=True)
class RobustnessRow:
    name: str
    params: dict
    asr: float
    n_success: int
    n_images: int


@dataclass(frozen=True)
class RobustnessTable:
    rows: list[RobustnessRow]
    target_class: int
    master_seed: int
    config_snapshot: dict = field(default_factory=dict)

    def row(self, name: str) -> RobustnessRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["perturbation", "params", "asr", "n_success", "n_images"])
            for r in self.rows:
                w.writerow([r.name, json.dumps(r.params, sort_keys=True),
                            repr(r.asr), r.n_success, r.n_images])

    def write_json(self, path) -> None:
        payload = {
            "target_class": self.target_class,
            "master_seed": self.master_seed,
            "config_snapshot": self.config_snapshot,
            "rows": [
                {"perturbation": r.name, "params": r.params, "asr": r.asr,
                 "n_success": r.n_success, "n_images": r.n_images}
                for r in self.rows
            ],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)
            fh.write("\n")


def perturbed_variants(patch: Patch, suite: SuiteConfig, seed: int) -> list[tuple[str, dict, Patch]]:
    """Materialize every suite row's patch. Drift rows use derived seeds.

    The color transfer delta is clipped to the patch's admissible interval
    (a fully saturated patch admits no shift at all); the delta actually
    applied is recorded in the row params.
    """
    rows: list[tuple[str, dict, Patch]] = []
    if suite.include_original:
        rows.append(("original", {}, patch))
    if suite.include_transfer:
        lo = -float(patch.pixels.min())
        hi = 1.0 - float(patch.pixels.max())
        delta = float(np.clip(suite.color_transfer_delta, lo, hi))
        rows.append(("color_transfer", {"delta_requested": suite.color_transfer_delta,
                                        "delta_applied": delta},
                     color_transfer(patch, delta)))
    if suite.include_blur:
        rows.append(("gaussian_blur3", {}, gaussian_blur3(patch)))
    for i, q in enumerate(suite.drift_qs):
        rows.append((f"color_drift_{q:g}", {"q": q},
                     color_drift(patch, q, derive_rng(seed, NS_DRIFT, i))))
    for f in suite.resize_factors:
        nh = int(round(patch.height * f))
        nw = int(round(patch.width * f))
        rows.append((f"resize_{f:g}x", {"factor": f, "height": nh, "width": nw},
                     resize_bilinear(patch, nh, nw)))
    return rows


def robustness_table(
    patch: Patch,
    suite: SuiteConfig,
    images: ImageBatch,
    target_class: int,
    backend: ClassifierBackend,
    tcfg: TransformConfig,
    seed: int,
) -> RobustnessTable:
    """One ASR row per perturbed patch, same images and master seed per row."""
    rows = []
    for name, params, variant in perturbed_variants(patch, suite, seed):
        rep = evaluate_asr(variant, images, target_class, backend, tcfg, seed)
        rows.append(RobustnessRow(name=name, params=params, asr=rep.asr,
                                  n_success=rep.n_success, n_images=rep.n_images))
    return RobustnessTable(
        rows=rows,
        target_class=int(target_class),
        master_seed=int(seed),
        config_snapshot={"suite": suite.to_json_dict(), "transform": tcfg.to_json_dict(),
                         "backend": backend.model_id, "patch_id": patch.ident()},
    )


# ---------------------------------------------------------------------------
# Brightness reporting
# ---------------------------------------------------------------------------


def brightness_report(patches: list[Patch], bins: int = 64) -> list[BrightnessStats]:
    """Brightness stats per patch, in input order."""
    if not patches:
        raise DomainError("need at least one patch")
    return [brightness_stats(p, bins=bins) for p in patches]


def write_brightness_csv(stats: list[BrightnessStats], names: list[str], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["patch", "min_b", "max_b", "range", "histogram"])
        for name, s in zip(names, stats):
            w.writerow([name, repr(s.min_b), repr(s.max_b), repr(s.range),
                        " ".join(str(int(c)) for c in s.histogram)])


def eval_seed_for(master_seed: int, tag: int) -> int:
    """Stable derived integer seed for a named evaluation pass."""
    return derive_seed(master_seed, NS_EVAL, tag)
