"""Input validation helpers shared by every module.

Images are plain ``numpy`` arrays: an RGB image is ``(H, W, 3)`` float64 in
[0, 1], a mask is ``(H, W)`` float64 with values in {0, 1}.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when array shapes do not agree."""


class MaskError(ValueError):
    """Raised when a mask is not binary or lacks foreground/background."""


class ImageFormatError(OSError):
    """Raised for image files this package cannot read (e.g. 16-bit PNGs)."""


def check_image(img, name: str = "image", clip: bool = False) -> np.ndarray:
    """Validate an RGB image and return it as a float64 array.

    With ``clip=True`` out-of-range values are clamped instead of rejected.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ShapeError(f"{name}: expected shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name}: height and width must be >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: contains non-finite values")
    if clip:
        return np.clip(arr, 0.0, 1.0)
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(
            f"{name}: values must lie in [0, 1], got range [{arr.min():.6g}, {arr.max():.6g}]"
        )
    return arr


def check_mask(mask, name: str = "mask", require_both: bool = False) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim == 3 and mask.shape[2] == 1:
        mask = mask[..., 0]
    if mask.ndim != 2:
        raise ShapeError(f"{name}: expected shape (H, W), got {mask.shape}")
    if not np.all((mask == 0.0) | (mask == 1.0)):
        raise MaskError(f"{name}: values must be 0 or 1")
    if require_both:
        n_fg = int(mask.sum())
        if n_fg == 0:
            raise MaskError(f"{name}: no foreground pixels")
        if n_fg == mask.size:
            raise MaskError(f"{name}: no background pixels")
    return mask


def check_same_shape(a: np.ndarray, b: np.ndarray, names=("a", "b")) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {names[0]} {a.shape} vs {names[1]} {b.shape}")


def check_mask_matches(img: np.ndarray, mask: np.ndarray, names=("image", "mask")) -> None:
    if img.shape[:2] != mask.shape[:2]:
        raise ShapeError(
            f"shape mismatch: {names[0]} {img.shape[:2]} vs {names[1]} {mask.shape[:2]}"
        )
