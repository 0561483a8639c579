"""Patch optimization: projected adaptive-moment gradient ascent.

Each step composites the current patch onto a training batch (one fresh
transform per image per step), pulls the target log-probability gradient
back through the composite, adds the brightness term, takes an Adam-style
ascent step, and clamps pixels to [0, 1]. After every epoch the candidate
patch is scored by validation ASR on the white-box source model; the best
epoch (ties to the earliest) is returned.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .backends import ClassifierBackend
from .compositor import TransformConfig, WarpPlan, check_feasible, sample_transform
from .core import ImageBatch, Patch, PatchMeta, brightness_stats, white_like
from .errors import DomainError, TrainingDivergedError
from .evaluate import evaluate_asr
from .losses import DEFAULT_EPS_GUARD, brightness_loss, brightness_loss_grad, total_loss
from .seeds import NS_INIT, NS_SHUFFLE, NS_TRANSFORM, NS_VAL, derive_rng, derive_seed

INIT_GRAY = "gray"
INIT_UNIFORM = "uniform_random"


@dataclass(frozen=True)
class TrainConfig:
    patch_size: int = 15
    target_class: int = 0
    lambda_: float = 0.0
    epochs: int = 40
    step_size: float = 0.01
    batch_size: int = 64
    seed: int = 0
    transform: TransformConfig = field(default_factory=TransformConfig)
    init: str = INIT_GRAY
    eps_guard: float = DEFAULT_EPS_GUARD

    def __post_init__(self):
        if self.epochs < 1:
            raise DomainError("epochs must be >= 1")
        if not (0.0 < self.eps_guard < 1.0):
            raise DomainError("eps_guard must lie in (0, 1)")
        if self.lambda_ < 0:
            raise DomainError("lambda must be nonnegative")
        if self.patch_size < 1 or self.batch_size < 1:
            raise DomainError("patch_size and batch_size must be positive")
        if self.step_size < 0:
            raise DomainError("step_size must be nonnegative")
        if self.init not in (INIT_GRAY, INIT_UNIFORM):
            raise DomainError(f"unknown init {self.init!r}")

    def to_json_dict(self) -> dict:
        return {
            "patch_size": self.patch_size,
            "target_class": self.target_class,
            "lambda": self.lambda_,
            "epochs": self.epochs,
            "step_size": self.step_size,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "transform": self.transform.to_json_dict(),
            "init": self.init,
            "eps_guard": self.eps_guard,
        }


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    l_adv: float
    l_b: float
    l: float
    val_asr: float
    brightness_range: float


@dataclass(frozen=True)
class TrainHistory:
    records: list[EpochRecord]

    def __len__(self) -> int:
        return len(self.records)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "l_adv", "l_b", "l", "val_asr", "brightness_range"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.l_adv), repr(r.l_b), repr(r.l),
                            repr(r.val_asr), repr(r.brightness_range)])


class _AdamAscent:
    """Adaptive-moment ascent with per-step clamp to [0, 1]."""

    def __init__(self, shape, step_size: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.step_size = step_size
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, pixels: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1**self.t)
        vhat = self.v / (1 - self.beta2**self.t)
        return np.clip(pixels + self.step_size * mhat / (np.sqrt(vhat) + self.eps), 0.0, 1.0)


def _init_pixels(cfg: TrainConfig) -> np.ndarray:
    shape = (3, cfg.patch_size, cfg.patch_size)
    if cfg.init == INIT_GRAY:
        return np.full(shape, 0.5)
    return derive_rng(cfg.seed, NS_INIT).uniform(0.0, 1.0, size=shape)


def patch_objective_grad(
    patch_pixels: np.ndarray,
    images: np.ndarray,
    transforms,
    source: ClassifierBackend,
    target_class: int,
    lambda_: float,
    eps_guard: float = DEFAULT_EPS_GUARD,
) -> tuple[float, float, np.ndarray]:
    """Loss terms and the exact patch gradient for one composited batch.

    Returns (l_adv, l_b, grad): grad is d(l_adv + lambda*l_b)/d patch. The
    brightness term contributes exactly zero to the gradient when lambda=0.
    This is the analytic path checked against finite differences.
    """
    n = len(images)
    plans = []
    composed = np.empty((n,) + images.shape[1:], dtype=np.float32)
    for i in range(n):
        plan = WarpPlan(patch_pixels.shape[1:], images.shape[2:], transforms[i])
        composed[i] = plan.apply(images[i], patch_pixels)[0]
        plans.append(plan)

    probs = np.asarray(source.predict(composed), dtype=np.float64)
    with np.errstate(divide="ignore"):
        l_adv = float(np.mean(np.log(probs[:, target_class])))
    g_in = np.asarray(source.grad_log_prob(composed, target_class), dtype=np.float64)

    grad = np.zeros_like(patch_pixels, dtype=np.float64)
    for i in range(n):
        grad += plans[i].vjp(g_in[i])
    grad /= n

    ref = white_like(patch_pixels)
    l_b = brightness_loss(patch_pixels, ref, eps_guard)
    if lambda_ > 0:
        grad = grad + lambda_ * brightness_loss_grad(patch_pixels, ref, eps_guard)
    return l_adv, l_b, grad


def train_patch(
    cfg: TrainConfig,
    train_images: ImageBatch,
    val_images: ImageBatch,
    source: ClassifierBackend,
    log=None,
) -> tuple[Patch, TrainHistory]:
    """Optimize a patch against the white-box source model.

    Deterministic: (cfg, seed, data, backend weights) fix the result bit for
    bit. Raises TrainingDivergedError if any loss goes non-finite NaN-style.
    """
    source.require_white_box()
    if len(val_images) == 0:
        raise DomainError("need a nonempty validation set")
    H, W = train_images.image_hw
    check_feasible(cfg.transform, (H, W), (cfg.patch_size, cfg.patch_size))

    pixels = _init_pixels(cfg)
    opt = _AdamAscent(pixels.shape, cfg.step_size)
    val_seed = derive_seed(cfg.seed, NS_VAL)
    n = len(train_images)

    best: tuple[float, int, Patch] | None = None  # (asr, epoch, patch)
    records: list[EpochRecord] = []
    for epoch in range(1, cfg.epochs + 1):
        order = derive_rng(cfg.seed, NS_SHUFFLE, epoch).permutation(n)
        sum_adv = sum_b = 0.0
        batches = 0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            transforms = [
                sample_transform(
                    derive_rng(cfg.seed, NS_TRANSFORM, epoch, b, int(i)),
                    cfg.transform, (H, W), (cfg.patch_size, cfg.patch_size),
                )
                for i in idx
            ]
            l_adv, l_b, grad = patch_objective_grad(
                pixels, train_images.pixels[idx], transforms, source,
                cfg.target_class, cfg.lambda_, cfg.eps_guard,
            )
            if math.isnan(l_adv) or math.isnan(l_b) or np.isnan(grad).any():
                raise TrainingDivergedError(f"NaN loss in epoch {epoch} batch {b}")
            pixels = opt.step(pixels, grad)
            sum_adv += l_adv
            sum_b += l_b
            batches += 1

        checkpoint = _snapshot(pixels, cfg, source.model_id, epoch)
        val = evaluate_asr(checkpoint, val_images, cfg.target_class, source,
                           cfg.transform, val_seed)
        rec = EpochRecord(
            epoch=epoch,
            l_adv=sum_adv / batches,
            l_b=sum_b / batches,
            l=total_loss(sum_adv / batches, sum_b / batches, cfg.lambda_),
            val_asr=val.asr,
            brightness_range=checkpoint.meta.brightness_range,
        )
        records.append(rec)
        if log:
            log(f"epoch {epoch}/{cfg.epochs} l_adv {rec.l_adv:.4f} l_b {rec.l_b:.4f} "
                f"val_asr {rec.val_asr:.3f} range {rec.brightness_range:.3f}")
        if best is None or val.asr > best[0]:
            best = (val.asr, epoch, checkpoint)

    return best[2], TrainHistory(records)


def _snapshot(pixels: np.ndarray, cfg: TrainConfig, source_id: str, epoch: int) -> Patch:
    p32 = np.clip(pixels, 0.0, 1.0).astype(np.float32)
    rng_b = float(brightness_stats(p32).range)
    return Patch(
        p32,
        PatchMeta(
            target_class=cfg.target_class,
            lambda_=cfg.lambda_,
            brightness_range=rng_b,
            seed=cfg.seed,
            source_model_id=source_id,
            epochs_trained=epoch,
        ),
    )


# ---------------------------------------------------------------------------
# Lambda sweep: the brightness/ASR trade-off study
# ---------------------------------------------------------------------------

DEFAULT_LAMBDA_GRID = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


@dataclass(frozen=True)
class SweepRow:
    lambda_: float
    brightness_range: float
    asr_target: float
    asr_source: float
    best_epoch: int


@dataclass(frozen=True)
class SweepReport:
    rows: list[SweepRow]  # sorted by brightness_range ascending
    patches: dict[float, Patch]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "brightness_range", "asr_target", "asr_source", "best_epoch"])
            for r in self.rows:
                w.writerow([repr(r.lambda_), repr(r.brightness_range),
                            repr(r.asr_target), repr(r.asr_source), r.best_epoch])

    def by_lambda(self, lam: float) -> SweepRow:
        for r in self.rows:
            if r.lambda_ == lam:
                return r
        raise KeyError(lam)


def sweep_lambda(
    base_cfg: TrainConfig,
    lambdas,
    train_images: ImageBatch,
    val_images: ImageBatch,
    eval_images: ImageBatch,
    source: ClassifierBackend,
    target: ClassifierBackend,
    eval_seed: int,
    log=None,
) -> SweepReport:
    """Train one patch per lambda; score each on the black-box target."""
    lams = [float(v) for v in lambdas]
    if not lams:
        raise DomainError("need at least one lambda")
    rows = []
    patches: dict[float, Patch] = {}
    for lam in lams:
        cfg = replace(base_cfg, lambda_=lam)
        if log:
            log(f"sweep: training lambda={lam:g}")
        patch, history = train_patch(cfg, train_images, val_images, source, log=None)
        tgt = evaluate_asr(patch, eval_images, cfg.target_class, target, cfg.transform, eval_seed)
        src = evaluate_asr(patch, eval_images, cfg.target_class, source, cfg.transform, eval_seed)
        rows.append(SweepRow(
            lambda_=lam,
            brightness_range=patch.meta.brightness_range,
            asr_target=tgt.asr,
            asr_source=src.asr,
            best_epoch=patch.meta.epochs_trained,
        ))
        patches[lam] = patch
        if log:
            log(f"sweep: lambda={lam:g} range={patch.meta.brightness_range:.3f} "
                f"asr_target={tgt.asr:.3f} asr_source={src.asr:.3f}")
    rows.sort(key=lambda r: r.brightness_range)
    return SweepReport(rows=rows, patches=patches)
