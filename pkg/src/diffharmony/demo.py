"""Toy-mixture verification run behind ``diffharmony demo``.

Each property returns a dict with ``passed`` and the measured values so the
summary can be written as JSON.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.stats import chisquare

from .codec import IdentityCodec, LinearPoolCodec
from .estimators import mixture_estimator, single_point_estimator
from .guidance import GuidanceConfig, appearance_distance
from .sampler import SamplerConfig, sample
from .schedule import linear_schedule, make_plan

TOY_SHAPE = (2, 2, 3)


def corner_points(low: float = 0.2, high: float = 0.8) -> np.ndarray:
    """Eight constant 2x2 images, one per RGB corner of ``{low, high}^3``."""
    return np.array(
        [np.broadcast_to(np.array(c), TOY_SHAPE) for c in itertools.product([low, high], repeat=3)]
    )


def brightness_modes(dark: float = 0.3, bright: float = 0.7) -> np.ndarray:
    """Two gray 2x2 images that differ only in brightness."""
    return np.array([np.full(TOY_SHAPE, dark), np.full(TOY_SHAPE, bright)])


def check_single_point(sched, seeds=range(10), tol=1e-3) -> dict:
    rng = np.random.default_rng(1234)
    # constant within 2x2 blocks so the pooling codec reproduces it exactly
    x0 = np.repeat(np.repeat(rng.uniform(size=(2, 2, 3)), 2, 0), 2, 1)
    worst = 0.0
    for codec in (IdentityCodec(), LinearPoolCodec(2)):
        est = single_point_estimator(codec.encode(x0), sched)
        for steps in (sched.T, 10):
            plan = make_plan(sched, steps)
            for s in seeds:
                out = sample(est, codec, cfg=SamplerConfig(plan, seed=s), sched=sched)
                worst = max(worst, float(np.abs(out - x0).max()))
    return {"passed": worst <= tol, "max_abs_error": worst, "tolerance": tol}


def check_mixture(sched, n_samples=2000, steps=20, radius=0.05, alpha=0.01) -> dict:
    points = corner_points()
    est = mixture_estimator(points, sched)
    plan = make_plan(sched, steps)
    counts = np.zeros(len(points), dtype=int)
    worst = 0.0
    for s in range(n_samples):
        out = sample(est, cfg=SamplerConfig(plan, seed=s), sched=sched)
        dist = np.abs(out[None] - points).reshape(len(points), -1).max(axis=1)
        counts[dist.argmin()] += 1
        worst = max(worst, float(dist.min()))
    pvalue = float(chisquare(counts).pvalue)
    return {
        "passed": worst <= radius and pvalue > alpha,
        "max_distance_to_nearest_point": worst,
        "counts": counts.tolist(),
        "chi2_pvalue": pvalue,
    }


def guidance_runs(sched, scale=10.0, sign=1, n=4, steps=50, seeds=range(20)):
    """Mean appearance distance to the bright mode, guided vs. unguided, over paired seeds."""
    modes = brightness_modes()
    target = modes[1]
    est = mixture_estimator(modes, sched)
    plan = make_plan(sched, steps)
    guided, plain = [], []
    for s in seeds:
        cfg = SamplerConfig(plan, guidance=GuidanceConfig(scale, n, sign), seed=s)
        guided.append(appearance_distance(sample(est, guidance_image=target, cfg=cfg, sched=sched), target))
        base = SamplerConfig(plan, guidance=GuidanceConfig(0.0, n, sign), seed=s)
        plain.append(appearance_distance(sample(est, guidance_image=target, cfg=base, sched=sched), target))
    return float(np.mean(guided)), float(np.mean(plain))


def check_guidance(sched, sign=1, scale=10.0) -> dict:
    guided, plain = guidance_runs(sched, scale=scale, sign=sign)
    return {"passed": guided < plain, "mean_D_guided": guided, "mean_D_unguided": plain, "sign": sign}


def check_zero_scale(sched, seeds=range(5)) -> dict:
    modes = brightness_modes()
    est = mixture_estimator(modes, sched)
    plan = make_plan(sched, 20)
    same = True
    for s in seeds:
        a = sample(est, guidance_image=modes[1], cfg=SamplerConfig(plan, guidance=GuidanceConfig(0.0), seed=s), sched=sched)
        b = sample(est, cfg=SamplerConfig(plan, seed=s), sched=sched)
        same &= bool(np.array_equal(a, b))
    return {"passed": same}


def run_demo(flip_guidance_sign: bool = False, n_mixture_samples: int = 2000) -> dict:
    sched = linear_schedule()
    results = {
        "single_point_recovery": check_single_point(sched),
        "mixture_fidelity": check_mixture(sched, n_samples=n_mixture_samples),
        "guidance_reduces_D": check_guidance(sched, sign=-1 if flip_guidance_sign else 1),
        "zero_scale_matches_unguided": check_zero_scale(sched),
    }
    return {"passed": all(r["passed"] for r in results.values()), "properties": results}
