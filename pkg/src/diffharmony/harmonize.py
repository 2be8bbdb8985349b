"""Harmonization pipeline: guided generation, color transfer and mask blending."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import check_image, check_mask, check_mask_matches, check_same_shape
from .codec import make_codec
from .estimators import MixtureNoiseEstimator, SinglePointNoiseEstimator
from .guidance import GuidanceConfig, appearance_distance
from .image import COLORSPACES, from_colorspace, resize_bilinear, resize_mask, to_colorspace
from .sampler import SamplerConfig, sample_k
from .schedule import linear_schedule, make_plan

# below this foreground spread the affine fit falls back to a mean shift
MIN_FG_STD = 1e-6


@dataclass(frozen=True)
class CompositeInput:
    composite: np.ndarray
    mask: np.ndarray
    ground_truth: np.ndarray | None = None

    def __post_init__(self):
        composite = check_image(self.composite, "composite")
        mask = check_mask(self.mask, require_both=True)
        check_mask_matches(composite, mask, ("composite", "mask"))
        object.__setattr__(self, "composite", composite)
        object.__setattr__(self, "mask", mask)
        if self.ground_truth is not None:
            gt = check_image(self.ground_truth, "ground_truth")
            check_same_shape(composite, gt, ("composite", "ground_truth"))
            object.__setattr__(self, "ground_truth", gt)


@dataclass(frozen=True)
class TransferConfig:
    colorspace: str = "hsl"
    match_strength: float = 1.0

    def __post_init__(self):
        if self.colorspace not in COLORSPACES:
            raise ValueError(f"colorspace must be one of {COLORSPACES}, got {self.colorspace!r}")
        if not 0.0 <= self.match_strength <= 1.0:
            raise ValueError(f"match_strength must be in [0, 1], got {self.match_strength}")


def lightness_affine(fg_values, bg_values) -> tuple[float, float]:
    """Gain and offset mapping foreground lightness moments onto the background's."""
    fg = np.asarray(fg_values, dtype=np.float64).ravel()
    bg = np.asarray(bg_values, dtype=np.float64).ravel()
    if fg.size == 0 or bg.size == 0:
        raise ValueError("lightness_affine needs nonempty foreground and background values")
    mu_fg, mu_bg = fg.mean(), bg.mean()
    sd_fg, sd_bg = fg.std(), bg.std()
    if sd_fg < MIN_FG_STD:
        return 1.0, float(mu_bg - mu_fg)
    a = sd_bg / sd_fg
    return float(a), float(mu_bg - a * mu_fg)


class ColorTransfer(TransformerMixin, BaseEstimator):
    """Move a generated image's chroma onto the composite's lightness.

    ``fit`` takes the composite and its mask; ``transform`` takes generated
    images of the same size. The generated image is converted to HSL/HSV, its
    lightness (or value) channel is replaced by the composite's, and inside
    the mask that channel is blended toward a moment-matched affine map that
    aligns foreground brightness with the background.

    Parameters
    ----------
    colorspace : {"hsl", "hsv"}
    match_strength : float in [0, 1]
        0 keeps the composite's lightness untouched, 1 applies the full affine match.
    """

    def __init__(self, colorspace: str = "hsl", match_strength: float = 1.0):
        self.colorspace = colorspace
        self.match_strength = match_strength

    def fit(self, X, mask=None):
        if mask is None:
            raise ValueError("ColorTransfer.fit needs the composite's mask")
        cfg = TransferConfig(self.colorspace, self.match_strength)
        composite = check_image(X, "composite")
        mask = check_mask(mask, require_both=True)
        check_mask_matches(composite, mask, ("composite", "mask"))
        fg = mask == 1.0
        light = to_colorspace(composite, cfg.colorspace)[..., 2]
        a, b = lightness_affine(light[fg], light[~fg])
        lam = cfg.match_strength
        target = light.copy()
        target[fg] = np.clip((1.0 - lam) * light[fg] + lam * (a * light[fg] + b), 0.0, 1.0)
        self.affine_ = (a, b)
        self.lightness_ = target
        self.mask_ = mask
        return self

    def transform(self, X):
        if not hasattr(self, "lightness_"):
            raise NotFittedError("ColorTransfer is not fitted yet; call fit first")
        generated = check_image(X, "generated")
        if generated.shape[:2] != self.lightness_.shape:
            raise ValueError(
                f"shape mismatch: generated {generated.shape[:2]} vs composite {self.lightness_.shape}"
            )
        cs = to_colorspace(generated, self.colorspace)
        cs[..., 2] = self.lightness_
        return from_colorspace(cs, self.colorspace)


def color_transfer(generated, composite, mask, cfg: TransferConfig | None = None) -> np.ndarray:
    cfg = cfg or TransferConfig()
    generated = check_image(generated, "generated")
    composite = check_image(composite, "composite")
    check_same_shape(generated, composite, ("generated", "composite"))
    ct = ColorTransfer(cfg.colorspace, cfg.match_strength).fit(composite, mask)
    return ct.transform(generated)


def blend_with_mask(processed, composite, mask) -> np.ndarray:
    """``mask * processed + (1 - mask) * composite``, exact selection for binary masks."""
    processed = np.asarray(processed, dtype=np.float64)
    composite = np.asarray(composite, dtype=np.float64)
    check_same_shape(processed, composite, ("processed", "composite"))
    mask = check_mask(mask)
    check_mask_matches(composite, mask, ("composite", "mask"))
    return np.where(mask[..., None] == 1.0, processed, composite)


class DiffusionHarmonizer(BaseEstimator):
    """End-to-end harmonizer.

    ``fit`` optionally takes reference images (the data the closed-form
    estimator samples from); without them each composite is its own single
    point, so generation reproduces the composite through the codec and the
    remaining pipeline (guidance, transfer, blending) acts on that.
    ``predict(composite, mask)`` returns ``n_candidates`` images at the input
    resolution.
    """

    def __init__(
        self,
        T: int = 1000,
        beta_start: float = 1e-4,
        beta_end: float = 0.02,
        num_steps: int = 50,
        eta: float = 0.0,
        guidance_scale: float = 10.0,
        guidance_n: int = 4,
        guidance_sign: int = 1,
        codec: str = "pool",
        codec_factor: int = 4,
        colorspace: str = "hsl",
        match_strength: float = 1.0,
        transfer: bool = True,
        n_candidates: int = 1,
        size: int = 256,
        condition_bandwidth: float | None = None,
        random_state: int = 0,
    ):
        self.T = T
        self.beta_start = beta_start
        self.beta_end = beta_end
        self.num_steps = num_steps
        self.eta = eta
        self.guidance_scale = guidance_scale
        self.guidance_n = guidance_n
        self.guidance_sign = guidance_sign
        self.codec = codec
        self.codec_factor = codec_factor
        self.colorspace = colorspace
        self.match_strength = match_strength
        self.transfer = transfer
        self.n_candidates = n_candidates
        self.size = size
        self.condition_bandwidth = condition_bandwidth
        self.random_state = random_state

    def fit(self, X=None, conditions=None):
        """Build schedule and codec; ``X`` is an optional list of reference images."""
        self.schedule_ = linear_schedule(self.T, self.beta_start, self.beta_end)
        self.codec_ = make_codec(self.codec, self.codec_factor)
        self.sampler_config_ = SamplerConfig(
            plan=make_plan(self.schedule_, self.num_steps),
            eta=self.eta,
            guidance=GuidanceConfig(self.guidance_scale, self.guidance_n, self.guidance_sign),
            seed=self.random_state,
        )
        self.transfer_config_ = (
            TransferConfig(self.colorspace, self.match_strength) if self.transfer else None
        )
        self.estimator_ = None
        if X is not None:
            encode = self._encode_resized
            points = np.stack([encode(check_image(x, "reference")) for x in X])
            conds = None
            if conditions is not None:
                conds = np.stack([encode(check_image(c, "condition")) for c in conditions])
            self.estimator_ = MixtureNoiseEstimator(self.schedule_, self.condition_bandwidth).fit(points, conds)
        return self

    def _encode_resized(self, img):
        return self.codec_.encode(resize_bilinear(img, self.size, self.size))

    def predict(self, composite, mask) -> list:
        if not hasattr(self, "schedule_"):
            self.fit()
        return harmonize(
            CompositeInput(composite, mask),
            estimator=self.estimator_,
            codec=self.codec_,
            sched=self.schedule_,
            sampler_cfg=self.sampler_config_,
            transfer_cfg=self.transfer_config_,
            k=self.n_candidates,
            size=self.size,
        )

    def score(self, composite, mask, ground_truth) -> float:
        """Mean PSNR (capped) of the candidates against the ground truth."""
        from .evaluation import PSNR_CAP, psnr

        cands = self.predict(composite, mask)
        gt = resize_bilinear(check_image(ground_truth, "ground_truth"), 256, 256)
        vals = [min(psnr(resize_bilinear(c, 256, 256), gt), PSNR_CAP) for c in cands]
        return float(np.mean(vals))


def harmonize(
    inp: CompositeInput,
    estimator=None,
    codec=None,
    sched=None,
    sampler_cfg: SamplerConfig | None = None,
    transfer_cfg: TransferConfig | None = None,
    k: int = 1,
    size: int = 256,
) -> list:
    """Produce ``k`` harmonized candidates for one composite.

    The composite is resized to ``size x size``, used both as the sampling
    condition and as the guidance image, and each sample is color-transferred
    (skipped when ``transfer_cfg`` is None) and blended into the composite
    through the mask. Candidates are resized back and blended once more at the
    input resolution so background pixels stay bitwise equal to the input.
    ``estimator=None`` uses a single-point estimator at the encoded composite.
    """
    if sched is None or sampler_cfg is None:
        raise ValueError("harmonize needs a schedule and a sampler config")
    codec = codec if codec is not None else make_codec("identity")
    h, w = inp.composite.shape[:2]
    comp = resize_bilinear(inp.composite, size, size)
    mask = resize_mask(inp.mask, size, size)
    if estimator is None:
        estimator = SinglePointNoiseEstimator(sched).fit(codec.encode(comp))
    samples = sample_k(estimator, codec, comp, comp, sampler_cfg, sched, k=k)
    out = []
    for gen in samples:
        if transfer_cfg is not None:
            gen = color_transfer(gen, comp, mask, transfer_cfg)
        blended = blend_with_mask(gen, comp, mask)
        if (h, w) != (size, size):
            blended = blend_with_mask(resize_bilinear(blended, h, w), inp.composite, inp.mask)
        out.append(blended)
    return out


def candidate_report(candidates, inp: CompositeInput) -> list:
    """Per-candidate appearance distance to the composite, plus MSE/PSNR when ground truth exists."""
    from .evaluation import PSNR_CAP, mse_255, psnr

    rows = []
    for i, cand in enumerate(candidates):
        row = {"index": i, "D": appearance_distance(cand, inp.composite)}
        if inp.ground_truth is not None:
            a = resize_bilinear(cand, 256, 256)
            b = resize_bilinear(inp.ground_truth, 256, 256)
            m = mse_255(a, b)
            row["mse"] = m
            row["psnr"] = min(psnr(a, b), PSNR_CAP)
        rows.append(row)
    return rows
