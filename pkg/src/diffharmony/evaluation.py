"""MSE/PSNR metrics on 256x256 RGB, composite synthesis, and directory evaluation."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import ShapeError, check_image, check_mask, check_mask_matches
from .harmonize import CompositeInput
from .image import load_png, resize_bilinear

logger = logging.getLogger(__name__)

EVAL_SIZE = 256
PSNR_CAP = 100.0

GAIN_RANGE = (0.6, 1.4)
OFFSET_RANGE = (-0.15, 0.15)
GAMMA_RANGE = (0.7, 1.4)

REPORT_NOTE = (
    "MSE on [0,255] RGB at 256x256; group rows are arithmetic means of per-pair "
    "values (mean of PSNRs, not PSNR of the mean MSE); zero-MSE pairs report PSNR capped at 100 dB"
)


def mse_255(a, b) -> float:
    """Mean squared error over all pixels and channels on the [0, 255] scale."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = 255.0 * a - 255.0 * b
    return float(np.mean(d * d))


def psnr_from_mse(mse: float) -> float:
    """``10 log10(255^2 / mse)``; ``inf`` for zero MSE."""
    if mse < 0:
        raise ValueError(f"mse must be >= 0, got {mse}")
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / mse)


def psnr(a, b) -> float:
    return psnr_from_mse(mse_255(a, b))


def apply_color_map(img, mask, gains, offsets, gammas) -> np.ndarray:
    """Per-channel ``gain * x**gamma + offset`` inside the mask, clamped; background copied."""
    img = check_image(img)
    mask = check_mask(mask)
    check_mask_matches(img, mask)
    gains, offsets, gammas = (np.asarray(v, dtype=np.float64).reshape(3) for v in (gains, offsets, gammas))
    mapped = np.clip(gains * img**gammas + offsets, 0.0, 1.0)
    return np.where(mask[..., None] == 1.0, mapped, img)


def random_color_map(rng) -> dict:
    return {
        "gains": rng.uniform(*GAIN_RANGE, size=3),
        "offsets": rng.uniform(*OFFSET_RANGE, size=3),
        "gammas": rng.uniform(*GAMMA_RANGE, size=3),
    }


def synthesize_composite(real_image, mask, rng) -> CompositeInput:
    """Recolor the masked region of a real image to make a composite with known ground truth."""
    real = check_image(real_image, "real_image")
    params = random_color_map(rng)
    composite = apply_color_map(real, mask, **params)
    return CompositeInput(composite, mask, ground_truth=real)


@dataclass
class EvalReport:
    pairs: list
    groups: dict = field(default_factory=dict)
    all: dict = field(default_factory=dict)
    unmatched: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"note": REPORT_NOTE, "pairs": self.pairs, "groups": self.groups, "all": self.all}
        if self.unmatched:
            out["unmatched"] = self.unmatched
        return out

    def format_table(self) -> str:
        rows = [(name, g["count"], g["mse"], g["psnr"]) for name, g in sorted(self.groups.items())]
        rows.append(("All", self.all["count"], self.all["mse"], self.all["psnr"]))
        width = max(len("Dataset"), *(len(r[0]) for r in rows))
        lines = [
            f"# {REPORT_NOTE}",
            f"{'Dataset':<{width}}  {'N':>5}  {'MSE':>10}  {'PSNR':>8}",
        ]
        for name, n, m, p in rows:
            lines.append(f"{name:<{width}}  {n:>5d}  {m:>10.2f}  {p:>8.2f}")
        return "\n".join(lines)


def _summary(pairs) -> dict:
    return {
        "mse": float(np.mean([p["mse"] for p in pairs])),
        "psnr": float(np.mean([p["psnr"] for p in pairs])),
        "count": len(pairs),
    }


def evaluate_pairs(pairs, group_map=None) -> EvalReport:
    """Aggregate ``[{name, mse, psnr}, ...]`` into group and overall means."""
    if not pairs:
        raise ValueError("no pairs to evaluate")
    group_map = group_map or {}
    groups: dict = {}
    for p in pairs:
        g = group_map.get(p["name"])
        if g is not None:
            groups.setdefault(g, []).append(p)
    return EvalReport(
        pairs=list(pairs),
        groups={g: _summary(ps) for g, ps in groups.items()},
        all=_summary(pairs),
    )


def _pair_metrics(name, pred_path, gt_path) -> dict:
    a = resize_bilinear(load_png(pred_path), EVAL_SIZE, EVAL_SIZE)
    b = resize_bilinear(load_png(gt_path), EVAL_SIZE, EVAL_SIZE)
    m = mse_255(a, b)
    return {"name": name, "mse": m, "psnr": min(psnr_from_mse(m), PSNR_CAP)}


class UnmatchedFilesError(ValueError):
    """No prediction/ground-truth pair shares a filename stem."""


def evaluate_dirs(pred_dir, gt_dir, group_map=None, max_workers: int = 4) -> EvalReport:
    """Pair PNGs by filename stem and report per-pair, per-group and overall metrics.

    Stems present on only one side are listed in ``report.unmatched`` and
    logged; an empty intersection raises UnmatchedFilesError.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    for d in (pred_dir, gt_dir):
        if not d.is_dir():
            raise FileNotFoundError(f"no such directory: {d}")
    preds = {p.stem: p for p in pred_dir.glob("*.png")}
    gts = {p.stem: p for p in gt_dir.glob("*.png")}
    only_pred = sorted(set(preds) - set(gts))
    only_gt = sorted(set(gts) - set(preds))
    common = sorted(set(preds) & set(gts))
    unmatched = {}
    if only_pred:
        unmatched["pred_only"] = only_pred
    if only_gt:
        unmatched["gt_only"] = only_gt
    if not common:
        raise UnmatchedFilesError(
            f"no matching filenames: predictions without ground truth {only_pred}, "
            f"ground truths without prediction {only_gt}"
        )
    if unmatched:
        logger.warning("unmatched files: %s", unmatched)
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        pairs = list(pool.map(lambda s: _pair_metrics(s, preds[s], gts[s]), common))
    report = evaluate_pairs(pairs, group_map)
    report.unmatched = unmatched
    return report
