"""Appearance consistency discriminator and multi-noise guidance gradients.

The discriminator compares two images only through their unweighted channel
mean, so any per-pixel perturbation with zero channel sum (pure chroma)
leaves it unchanged. All gradients are closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import ShapeError
from .image import channel_mean
from .schedule import NoiseSchedule, q_sample


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance strength and noise-copy count.

    ``sign=+1`` adds ``scale * sqrt(1 - abar_t) * grad`` to the predicted noise,
    which moves the predicted clean image down the discriminator gradient.
    ``sign=-1`` flips the term and pushes the sample away from the guidance image.
    """

    scale: float = 1.0
    n: int = 4
    sign: int = 1

    def __post_init__(self):
        if not np.isfinite(self.scale):
            raise ValueError(f"guidance scale must be finite, got {self.scale}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"guidance n must be an integer >= 1, got {self.n}")
        if self.sign not in (1, -1):
            raise ValueError(f"guidance sign must be +1 or -1, got {self.sign}")


def _pair(x1, x2):
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise ShapeError(f"shape mismatch: {x1.shape} vs {x2.shape}")
    if x1.ndim < 1 or x1.shape[-1] != 3:
        raise ShapeError(f"expected a trailing RGB axis of size 3, got shape {x1.shape}")
    return x1, x2


def appearance_distance(x1, x2) -> float:
    """Mean over pixels of the squared grayscale difference."""
    x1, x2 = _pair(x1, x2)
    d = channel_mean(x1) - channel_mean(x2)
    return float(np.mean(d * d))


def appearance_distance_grad(x, y) -> np.ndarray:
    """Gradient of :func:`appearance_distance` in its first argument.

    Every channel of a pixel receives ``2 (C(x) - C(y)) / (3 * n_pixels)``.
    """
    x, y = _pair(x, y)
    n_pixels = x.size // 3
    g = 2.0 * (channel_mean(x) - channel_mean(y)) / (3.0 * n_pixels)
    return np.repeat(g[..., None], 3, axis=-1)


def noisy_guidance_set(y, t: int, sched: NoiseSchedule, n: int, rng) -> list:
    """``n`` independent forward-noised copies of the guidance image at level ``t``."""
    t = sched.check_timestep(t, allow_zero=False)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    y = np.asarray(y, dtype=np.float64)
    return [q_sample(y, t, rng.standard_normal(y.shape), sched) for _ in range(n)]


def guidance_objective(x_t, guidance_set) -> float:
    """Sum of discriminator values against every noisy guidance copy."""
    if len(guidance_set) == 0:
        raise ValueError("guidance set is empty")
    return sum(appearance_distance(x_t, y) for y in guidance_set)


def guidance_gradient(x_t, guidance_set) -> np.ndarray:
    """Gradient of :func:`guidance_objective` with respect to ``x_t``."""
    if len(guidance_set) == 0:
        raise ValueError("guidance set is empty")
    grad = appearance_distance_grad(x_t, guidance_set[0])
    for y in guidance_set[1:]:
        grad = grad + appearance_distance_grad(x_t, y)
    return grad


def latent_guidance_gradient(h_t, guidance_set, codec) -> np.ndarray:
    """Chain rule through the decoder: ``decode_vjp(h, grad_x G(decode(h)))``."""
    x_t = codec.decode(h_t)
    return codec.decode_vjp(h_t, guidance_gradient(x_t, guidance_set))
