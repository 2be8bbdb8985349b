"""DDIM sampling with optional appearance-consistency guidance."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from ._random import GUIDANCE_NOISE, INIT_NOISE, STEP_NOISE, rng_stream
from .codec import IdentityCodec
from .guidance import (
    GuidanceConfig,
    guidance_objective,
    latent_guidance_gradient,
    noisy_guidance_set,
)
from .schedule import NoiseSchedule, TimestepPlan

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplerConfig:
    plan: TimestepPlan
    eta: float = 0.0
    guidance: GuidanceConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta}")
        if not isinstance(self.plan, TimestepPlan):
            object.__setattr__(self, "plan", TimestepPlan(tuple(self.plan)))


def ddim_step(h_t, eps_hat, t: int, t_prev: int, sched: NoiseSchedule, eta: float = 0.0, rng=None):
    """One DDIM update from level ``t`` to level ``t_prev``.

    With ``eta > 0`` a fresh Gaussian term of standard deviation
    ``eta * sqrt((1-abar_prev)/(1-abar_t)) * sqrt(1 - abar_t/abar_prev)`` is
    added; ``rng`` is then required. Stepping to ``t_prev = 0`` returns the
    predicted clean state itself.
    """
    if not t > t_prev >= 0:
        raise ValueError(f"need t > t_prev >= 0, got t={t}, t_prev={t_prev}")
    sched.check_timestep(t)
    h_t = np.asarray(h_t, dtype=np.float64)
    abar_t = sched.alpha_bars[t]
    abar_prev = sched.alpha_bars[t_prev]
    x0_pred = (h_t - np.sqrt(1.0 - abar_t) * eps_hat) / np.sqrt(abar_t)
    if t_prev == 0:
        return x0_pred
    sigma = 0.0
    if eta > 0:
        sigma = eta * np.sqrt((1.0 - abar_prev) / (1.0 - abar_t)) * np.sqrt(1.0 - abar_t / abar_prev)
    out = np.sqrt(abar_prev) * x0_pred + np.sqrt(max(1.0 - abar_prev - sigma**2, 0.0)) * eps_hat
    if sigma > 0:
        if rng is None:
            raise ValueError("eta > 0 requires an rng")
        out = out + sigma * rng.standard_normal(h_t.shape)
    return out


def _latent_shape(estimator, codec, condition, guidance_image, latent_shape):
    if latent_shape is not None:
        return tuple(latent_shape)
    shape = getattr(estimator, "item_shape_", None)
    if shape is not None:
        return tuple(shape)
    for img in (condition, guidance_image):
        if img is not None:
            return codec.latent_shape(np.shape(img))
    raise ValueError("cannot infer latent shape; pass latent_shape")


def sample(
    estimator,
    codec=None,
    condition=None,
    guidance_image=None,
    cfg: SamplerConfig | None = None,
    sched: NoiseSchedule | None = None,
    latent_shape=None,
    return_latent: bool = False,
):
    """Run one sampling chain and return the decoded image clamped to [0, 1].

    The chain starts from standard normal noise in latent space. At each plan
    step the estimator's noise prediction is optionally shifted by the
    guidance term ``sign * scale * sqrt(1 - abar_t) * grad_h G`` where ``G``
    sums the discriminator against freshly noised copies of ``guidance_image``.
    Guidance with ``scale == 0`` is skipped entirely.
    """
    if cfg is None or sched is None:
        raise ValueError("sample needs both cfg and sched")
    codec = codec if codec is not None else IdentityCodec()
    guided = cfg.guidance is not None and cfg.guidance.scale != 0
    if guided and guidance_image is None:
        raise ValueError("guidance is enabled but no guidance image was given")
    if cfg.plan.timesteps[0] > sched.T:
        raise ValueError(f"plan starts at {cfg.plan.timesteps[0]} but schedule has T={sched.T}")

    shape = _latent_shape(estimator, codec, condition, guidance_image, latent_shape)
    cond_latent = codec.encode(condition) if condition is not None else None
    if guided:
        guidance_image = np.asarray(guidance_image, dtype=np.float64)
        decoded_shape = codec.decode(np.zeros(shape)).shape
        if guidance_image.shape != decoded_shape:
            raise ValueError(
                f"guidance image shape {guidance_image.shape} does not match decoded shape {decoded_shape}"
            )

    h = rng_stream(cfg.seed, INIT_NOISE).standard_normal(shape)
    g_rng = rng_stream(cfg.seed, GUIDANCE_NOISE)
    z_rng = rng_stream(cfg.seed, STEP_NOISE)
    for t, t_prev in cfg.plan.pairs():
        eps = estimator.predict(h, t, cond_latent)
        if guided:
            g = cfg.guidance
            ys = noisy_guidance_set(guidance_image, t, sched, g.n, g_rng)
            grad = latent_guidance_gradient(h, ys, codec)
            eps = eps + g.sign * g.scale * np.sqrt(1.0 - sched.alpha_bars[t]) * grad
            if logger.isEnabledFor(logging.DEBUG):
                logger.debug("t=%d G=%.6g", t, guidance_objective(codec.decode(h), ys))
        else:
            logger.debug("t=%d", t)
        h = ddim_step(h, eps, t, t_prev, sched, cfg.eta, z_rng)

    out = np.clip(codec.decode(h), 0.0, 1.0)
    if return_latent:
        return out, h
    return out


def sample_k(
    estimator,
    codec=None,
    condition=None,
    guidance_image=None,
    cfg: SamplerConfig | None = None,
    sched: NoiseSchedule | None = None,
    k: int = 1,
    base_seed: int | None = None,
    latent_shape=None,
) -> list:
    """``k`` chains with seeds ``base_seed, ..., base_seed + k - 1``.

    ``base_seed`` defaults to ``cfg.seed``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    base = cfg.seed if base_seed is None else int(base_seed)
    return [
        sample(estimator, codec, condition, guidance_image, replace(cfg, seed=base + i), sched, latent_shape)
        for i in range(k)
    ]
