"""Attack objective: target log-probability plus brightness restriction.

The trainer maximizes

    L = L_adv + lambda * L_b

where L_adv is the mean log softmax probability of the target class over the
composited batch and L_b = log(1 - mse(patch, reference)) rewards patches
near the all-white reference. Both terms and their patch gradients are
computed in float64.
"""

from __future__ import annotations

import math

import numpy as np

from .core import Patch, mse
from .errors import DomainError

DEFAULT_EPS_GUARD = 1e-6


def adv_loss(backend, composed_batch: np.ndarray, target_class: int) -> float:
    """Mean log probability of the target class over a composed batch."""
    probs = np.asarray(backend.predict(composed_batch), dtype=np.float64)
    if not (0 <= target_class < probs.shape[1]):
        raise DomainError(f"target class {target_class} out of range")
    with np.errstate(divide="ignore"):
        return float(np.mean(np.log(probs[:, target_class])))


def brightness_loss(
    patch: Patch | np.ndarray,
    reference: Patch | np.ndarray,
    eps_guard: float = DEFAULT_EPS_GUARD,
) -> float:
    """log(1 - mse(patch, reference)), floor-guarded against the mse=1 pole."""
    if not (0.0 < eps_guard < 1.0):
        raise DomainError("eps_guard must lie in (0, 1)")
    p = patch.pixels if isinstance(patch, Patch) else np.asarray(patch)
    r = reference.pixels if isinstance(reference, Patch) else np.asarray(reference)
    return math.log(max(1.0 - mse(p, r), eps_guard))


def brightness_loss_grad(
    patch_pixels: np.ndarray,
    reference_pixels: np.ndarray,
    eps_guard: float = DEFAULT_EPS_GUARD,
) -> np.ndarray:
    """d brightness_loss / d patch. Zero once the floor guard engages."""
    p = np.asarray(patch_pixels, dtype=np.float64)
    r = np.asarray(reference_pixels, dtype=np.float64)
    if p.shape != r.shape:
        raise DomainError(f"shape mismatch: {p.shape} vs {r.shape}")
    one_minus = 1.0 - mse(p, r)
    if one_minus <= eps_guard:
        return np.zeros_like(p)
    return -2.0 * (p - r) / (p.size * one_minus)


def total_loss(l_adv: float, l_b: float, lambda_: float) -> float:
    """Weighted sum of the two objective terms."""
    if lambda_ < 0:
        raise DomainError("lambda must be nonnegative")
    return float(l_adv + lambda_ * l_b)
