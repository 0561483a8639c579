"""Classifier backends and the twin-network reference protocol.

A backend exposes class probabilities for image batches; white-box backends
additionally expose the gradient of the target log-probability with respect
to the input pixels. The gray-box protocol trains two networks of identical
architecture from different seeds: the attacker optimizes against the
white-box source and is scored against the black-box target.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .datasets import DatasetSpec, load_dataset
from .errors import BackendError, BackendUnderfitError, CapabilityError, DomainError
from .seeds import derive_rng

WHITE_BOX = "white_box"
BLACK_BOX = "black_box"

_PREDICT_CHUNK = 256


def _set_torch_threads():
    import torch

    env = os.environ.get("BRPATCH_THREADS")
    if env:
        torch.set_num_threads(max(1, int(env)))


class ClassifierBackend:
    """Contract: predict probabilities; white-box also yields input gradients."""

    model_id: str = "backend"
    num_classes: int = 0
    capability: str = BLACK_BOX

    def predict(self, batch: np.ndarray) -> np.ndarray:
        """(N, 3, H, W) in [0, 1] -> (N, num_classes) probabilities."""
        raise NotImplementedError

    def grad_log_prob(self, batch: np.ndarray, class_index: int) -> np.ndarray:
        """d log prob(class) / d pixels, shape like `batch`. White-box only."""
        raise NotImplementedError

    def require_white_box(self):
        if self.capability != WHITE_BOX:
            raise CapabilityError(
                f"backend {self.model_id!r} is {self.capability}; gradients unavailable"
            )

    def predict_batched(self, pixels: np.ndarray, chunk: int = _PREDICT_CHUNK) -> np.ndarray:
        out = [self.predict(pixels[i : i + chunk]) for i in range(0, len(pixels), chunk)]
        return np.concatenate(out, axis=0) if out else np.zeros((0, self.num_classes))


class LinearSoftmaxBackend(ClassifierBackend):
    """Fixed random linear-softmax model, float64, with exact gradients.

    Useful as a fast fully reproducible stand-in where a real network is
    overkill (unit tests, gradient oracles).
    """

    def __init__(self, image_hw: tuple[int, int], num_classes: int = 10, seed: int = 0,
                 capability: str = WHITE_BOX):
        h, w = image_hw
        d = 3 * h * w
        rng = derive_rng(seed, 77)
        self.weights = rng.normal(0.0, 1.0 / np.sqrt(d), size=(num_classes, d))
        self.bias = np.zeros(num_classes)
        self.image_hw = (h, w)
        self.num_classes = num_classes
        self.capability = capability
        self.model_id = f"linear-softmax-{seed}"

    def _logits(self, batch: np.ndarray) -> np.ndarray:
        x = np.asarray(batch, dtype=np.float64).reshape(len(batch), -1)
        return x @ self.weights.T + self.bias

    def predict(self, batch: np.ndarray) -> np.ndarray:
        z = self._logits(batch)
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def grad_log_prob(self, batch: np.ndarray, class_index: int) -> np.ndarray:
        self.require_white_box()
        p = self.predict(batch)
        coeff = -p
        coeff[:, class_index] += 1.0
        g = coeff @ self.weights
        return g.reshape(np.asarray(batch).shape)


def _build_convnet(num_classes: int, channels: tuple[int, int, int], image_size: int):
    import torch.nn as nn

    c1, c2, c3 = channels
    feat = (image_size // 8) ** 2 * c3
    return nn.Sequential(
        nn.Conv2d(3, c1, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
        nn.Conv2d(c1, c2, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
        nn.Conv2d(c2, c3, 3, padding=1), nn.ReLU(), nn.MaxPool2d(2),
        nn.Flatten(), nn.Linear(feat, num_classes),
    )


DEFAULT_CHANNELS = (16, 32, 64)


class ConvNetBackend(ClassifierBackend):
    """Small convolutional classifier wrapped behind the backend contract."""

    def __init__(self, model, num_classes: int, model_id: str,
                 capability: str = BLACK_BOX, channels=DEFAULT_CHANNELS,
                 image_size: int = 48, metrics=None):
        _set_torch_threads()
        self.model = model.eval()
        for p in self.model.parameters():
            p.requires_grad_(False)
        self.num_classes = num_classes
        self.model_id = model_id
        self.capability = capability
        self.channels = tuple(channels)
        self.image_size = int(image_size)
        self.metrics = dict(metrics or {})

    def predict(self, batch: np.ndarray) -> np.ndarray:
        import torch

        x = torch.from_numpy(np.array(batch, dtype=np.float32, copy=True))
        with torch.no_grad():
            return torch.softmax(self.model(x), dim=1).numpy()

    def grad_log_prob(self, batch: np.ndarray, class_index: int) -> np.ndarray:
        import torch
        import torch.nn.functional as F

        self.require_white_box()
        x = torch.from_numpy(np.array(batch, dtype=np.float32, copy=True))
        x.requires_grad_(True)
        logp = F.log_softmax(self.model(x), dim=1)[:, class_index].sum()
        (grad,) = torch.autograd.grad(logp, x)
        return grad.numpy()

    def save(self, path) -> None:
        import torch

        torch.save(
            {
                "format": "brpatch-convnet-v1",
                "channels": list(self.channels),
                "image_size": self.image_size,
                "num_classes": self.num_classes,
                "model_id": self.model_id,
                "state": self.model.state_dict(),
                "metrics": self.metrics,
            },
            path,
        )

    @classmethod
    def load(cls, path, capability: str = BLACK_BOX) -> "ConvNetBackend":
        import torch

        try:
            blob = torch.load(path, map_location="cpu", weights_only=False)
        except Exception as exc:
            raise BackendError(f"cannot load backend from {path}: {exc}") from exc
        if not isinstance(blob, dict) or blob.get("format") != "brpatch-convnet-v1":
            raise BackendError(f"{path} is not a saved convnet backend")
        model = _build_convnet(blob["num_classes"], tuple(blob["channels"]), blob["image_size"])
        model.load_state_dict(blob["state"])
        return cls(model, blob["num_classes"], blob["model_id"], capability,
                   blob["channels"], blob["image_size"], blob.get("metrics"))


@dataclass(frozen=True)
class BackendTrainConfig:
    """How to fit the twin reference classifiers."""

    dataset: DatasetSpec
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    channels: tuple[int, int, int] = DEFAULT_CHANNELS
    augment_shift: int = 3
    augment_contrast_lo: float = 0.55
    min_accuracy: float = 0.8

    def to_json_dict(self) -> dict:
        return {
            "dataset": self.dataset.to_json_dict(),
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "channels": list(self.channels),
            "augment_shift": self.augment_shift,
            "augment_contrast_lo": self.augment_contrast_lo,
            "min_accuracy": self.min_accuracy,
        }


def _augment(pixels: np.ndarray, shift: int, contrast_lo: float,
             rng: np.random.Generator) -> np.ndarray:
    """Random crop/flip plus contrast-brightness jitter.

    The jitter maps an image affinely into a random sub-interval of [0, 1],
    so the classifiers become tolerant of washed-out, brightness-shifted
    renditions of their classes (printing and lighting do the same).
    """
    n, _, h, w = pixels.shape
    out = pixels
    if shift > 0:
        padded = np.pad(pixels, ((0, 0), (0, 0), (shift, shift), (shift, shift)), mode="edge")
        dy = rng.integers(0, 2 * shift + 1, size=n)
        dx = rng.integers(0, 2 * shift + 1, size=n)
        flip = rng.random(n) < 0.5
        out = np.empty_like(pixels)
        for i in range(n):
            crop = padded[i, :, dy[i] : dy[i] + h, dx[i] : dx[i] + w]
            out[i] = crop[:, :, ::-1] if flip[i] else crop
    if contrast_lo < 1.0:
        apply = rng.random(n) < 0.7
        c = rng.uniform(contrast_lo, 1.0, size=n)
        b = rng.uniform(0.0, 1.0, size=n) * (1.0 - c)
        scale = np.where(apply, c, 1.0).astype(np.float32)[:, None, None, None]
        offset = np.where(apply, b, 0.0).astype(np.float32)[:, None, None, None]
        out = np.clip(out * scale + offset, 0.0, 1.0)
    return out


def train_convnet(cfg: BackendTrainConfig, seed: int, model_id: str,
                  capability: str = BLACK_BOX, log=None) -> ConvNetBackend:
    """Fit one convnet on the dataset's train split; verify test accuracy."""
    import torch
    import torch.nn as nn

    _set_torch_threads()
    data = load_dataset(cfg.dataset)
    train, test = data.train, data.test
    if train.labels is None or test.labels is None:
        raise BackendError("reference training needs labeled images")

    torch.manual_seed(seed)
    image_size = train.image_hw[0]
    model = _build_convnet(data.num_classes, cfg.channels, image_size)
    opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                           weight_decay=cfg.weight_decay)
    lossfn = nn.CrossEntropyLoss()
    shuffle_rng = derive_rng(seed, 11)
    aug_rng = derive_rng(seed, 12)

    n = len(train)
    model.train()
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = _augment(train.pixels[idx], cfg.augment_shift,
                          cfg.augment_contrast_lo, aug_rng)
            x = torch.from_numpy(np.array(xb, copy=True))
            y = torch.from_numpy(train.labels[idx])
            opt.zero_grad()
            loss = lossfn(model(x), y)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(idx)
        if log:
            log(f"[{model_id}] epoch {epoch + 1}/{cfg.epochs} loss {total / n:.4f}")

    model.eval()
    backend = ConvNetBackend(model, data.num_classes, model_id, capability,
                             cfg.channels, image_size)
    acc = clean_accuracy(backend, test.pixels, test.labels)
    backend.metrics = {"clean_test_accuracy": acc, "seed": int(seed),
                       "epochs": cfg.epochs, "n_train": n, "n_test": len(test)}
    if acc < cfg.min_accuracy:
        raise BackendUnderfitError(
            f"backend {model_id!r} underfit: clean test accuracy {acc:.3f} "
            f"< floor {cfg.min_accuracy:.2f}"
        )
    return backend


def clean_accuracy(backend: ClassifierBackend, pixels: np.ndarray, labels: np.ndarray) -> float:
    probs = backend.predict_batched(pixels)
    return float(np.mean(np.argmax(probs, axis=1) == labels))


def reference_backends(seed_source: int, seed_target: int, cfg: BackendTrainConfig,
                       log=None) -> tuple[ConvNetBackend, ConvNetBackend]:
    """Twin classifiers, identically built, separately seeded.

    The source is white-box (the attacker optimizes through it); the target
    is black-box and only answers probability queries.
    """
    source = train_convnet(cfg, seed_source, f"convnet-src-{seed_source}", WHITE_BOX, log)
    target = train_convnet(cfg, seed_target, f"convnet-tgt-{seed_target}", BLACK_BOX, log)
    return source, target


def load_backend(path, capability: str = BLACK_BOX) -> ConvNetBackend:
    if not os.path.exists(path):
        raise BackendError(f"backend file not found: {path}")
    return ConvNetBackend.load(path, capability)


def validate_probs(probs: np.ndarray, num_classes: int) -> None:
    """Contract check used by the harness: nonnegative rows summing to one."""
    p = np.asarray(probs)
    if p.ndim != 2 or p.shape[1] != num_classes:
        raise DomainError(f"probability matrix has wrong shape {p.shape}")
    if p.min() < 0 or np.abs(p.sum(axis=1) - 1.0).max() > 1e-5:
        raise BackendError("backend produced an invalid probability vector")
