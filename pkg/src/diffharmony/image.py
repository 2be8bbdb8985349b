"""Pixel-space primitives: grayscale, HSL/HSV conversion, resizing and PNG I/O."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

from ._io import atomic_write_bytes
from ._validation import ImageFormatError, ShapeError, check_image, check_mask

COLORSPACES = ("hsl", "hsv")

# Pillow modes holding more than 8 bits per sample.
_WIDE_MODES = {"I", "I;16", "I;16B", "I;16L", "I;16N", "F"}


def channel_mean(x) -> np.ndarray:
    """``(R + G + B) / 3`` over the trailing axis, summed in sorted order.

    Sorting first makes the result bitwise invariant to channel permutations.
    """
    s = np.sort(np.asarray(x, dtype=np.float64), axis=-1)
    return (s[..., 0] + s[..., 1] + s[..., 2]) / 3.0


def to_grayscale(img) -> np.ndarray:
    """Unweighted channel mean, shape ``(H, W)``; no perceptual weighting."""
    return channel_mean(check_image(img))


def _hue(r, g, b, mx, delta):
    safe = np.where(delta > 0, delta, 1.0)
    h = np.where(
        mx == r,
        np.mod((g - b) / safe, 6.0),
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta > 0, 60.0 * h, 0.0)
    return np.mod(h, 360.0)


def _from_chroma(h, c, m):
    hp = np.mod(h, 360.0) / 60.0
    x = c * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    sector = np.floor(hp).astype(int) % 6
    zero = np.zeros_like(c)
    r = np.choose(sector, [c, x, zero, zero, x, c])
    g = np.choose(sector, [x, c, c, x, zero, zero])
    b = np.choose(sector, [zero, zero, x, c, c, x])
    return np.clip(np.stack([r + m, g + m, b + m], axis=-1), 0.0, 1.0)


def rgb_to_hsl(img) -> np.ndarray:
    """Hexcone HSL. Returns ``(H, W, 3)`` with H in [0, 360), S and L in [0, 1].

    Achromatic pixels get hue 0.
    """
    img = check_image(img)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    mx = img.max(axis=-1)
    mn = img.min(axis=-1)
    delta = mx - mn
    light = (mx + mn) / 2.0
    denom = 1.0 - np.abs(2.0 * light - 1.0)
    sat = np.where(delta > 0, delta / np.where(denom > 0, denom, 1.0), 0.0)
    return np.stack([_hue(r, g, b, mx, delta), np.clip(sat, 0.0, 1.0), light], axis=-1)


def hsl_to_rgb(hsl) -> np.ndarray:
    hsl = np.asarray(hsl, dtype=np.float64)
    h, s, light = hsl[..., 0], np.clip(hsl[..., 1], 0, 1), np.clip(hsl[..., 2], 0, 1)
    c = (1.0 - np.abs(2.0 * light - 1.0)) * s
    return _from_chroma(h, c, light - c / 2.0)


def rgb_to_hsv(img) -> np.ndarray:
    img = check_image(img)
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    mx = img.max(axis=-1)
    delta = mx - img.min(axis=-1)
    sat = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    return np.stack([_hue(r, g, b, mx, delta), np.clip(sat, 0.0, 1.0), mx], axis=-1)


def hsv_to_rgb(hsv) -> np.ndarray:
    hsv = np.asarray(hsv, dtype=np.float64)
    h, s, v = hsv[..., 0], np.clip(hsv[..., 1], 0, 1), np.clip(hsv[..., 2], 0, 1)
    c = v * s
    return _from_chroma(h, c, v - c)


def to_colorspace(img, colorspace: str = "hsl") -> np.ndarray:
    """Dispatch to :func:`rgb_to_hsl` or :func:`rgb_to_hsv`."""
    if colorspace == "hsl":
        return rgb_to_hsl(img)
    if colorspace == "hsv":
        return rgb_to_hsv(img)
    raise ValueError(f"colorspace must be one of {COLORSPACES}, got {colorspace!r}")


def from_colorspace(arr, colorspace: str = "hsl") -> np.ndarray:
    if colorspace == "hsl":
        return hsl_to_rgb(arr)
    if colorspace == "hsv":
        return hsv_to_rgb(arr)
    raise ValueError(f"colorspace must be one of {COLORSPACES}, got {colorspace!r}")


def _interp_axis(arr: np.ndarray, n_out: int, axis: int) -> np.ndarray:
    n_in = arr.shape[axis]
    if n_in == n_out:
        return arr
    # pixel centers at i + 0.5, sampling clamped to the edge pixels
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0.0, n_in - 1)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = pos - lo
    shape = [1] * arr.ndim
    shape[axis] = n_out
    frac = frac.reshape(shape)
    a = np.take(arr, lo, axis=axis)
    b = np.take(arr, hi, axis=axis)
    return a + frac * (b - a)


def resize_bilinear(img, height: int, width: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and edge clamping.

    Works on ``(H, W)`` and ``(H, W, C)`` arrays. Same-size resizing returns
    an exact copy.
    """
    if height < 1 or width < 1:
        raise ValueError(f"target size must be >= 1, got {height}x{width}")
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ShapeError(f"expected a 2-D or 3-D array, got shape {arr.shape}")
    if arr.shape[:2] == (height, width):
        return arr.copy()
    out = _interp_axis(arr, height, 0)
    out = _interp_axis(out, width, 1)
    # convex combinations stay in range up to rounding
    return np.clip(out, arr.min(), arr.max())


def resize_mask(mask, height: int, width: int) -> np.ndarray:
    """Resize a binary mask and re-binarize at 0.5."""
    mask = check_mask(mask)
    return (resize_bilinear(mask, height, width) >= 0.5).astype(np.float64)


def _open_8bit(path) -> Image.Image:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    im = Image.open(path)
    im.load()
    if im.mode in _WIDE_MODES:
        raise ImageFormatError(f"{path}: unsupported bit depth (mode {im.mode}); expected 8-bit")
    return im


def load_png(path) -> np.ndarray:
    """Load an 8-bit PNG as an ``(H, W, 3)`` float image, values ``v / 255``.

    Grayscale and palette images are expanded to RGB; an alpha channel is dropped.
    """
    im = _open_8bit(path)
    if im.mode != "RGB":
        im = im.convert("RGB")
    return np.asarray(im, dtype=np.float64) / 255.0


def load_mask(path, threshold: int = 128) -> np.ndarray:
    """Load a grayscale PNG mask; pixels ``>= threshold`` become foreground."""
    im = _open_8bit(path)
    if im.mode != "L":
        im = im.convert("L")
    return (np.asarray(im) >= threshold).astype(np.float64)


def _atomic_save(im: Image.Image, path) -> None:
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def to_uint8(img) -> np.ndarray:
    return np.clip(np.round(np.asarray(img, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def save_png(img, path) -> None:
    """Write an RGB image (or a 2-D mask) as an 8-bit PNG, atomically."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        im = Image.fromarray(to_uint8(arr))
    else:
        im = Image.fromarray(to_uint8(check_image(arr, clip=True)))
    _atomic_save(im, path)
