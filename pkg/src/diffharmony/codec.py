"""Latent encoder/decoder pairs with exact decoder vector-Jacobian products.

Both codecs are linear, so ``decode_vjp`` does not depend on the latent it is
evaluated at; the argument is kept so nonlinear codecs can share the interface.
"""

from __future__ import annotations

import numpy as np

from ._validation import ShapeError


class LatentCodec:
    """Interface: ``encode``, ``decode`` and ``decode_vjp``."""

    def encode(self, x) -> np.ndarray:
        raise NotImplementedError

    def decode(self, h) -> np.ndarray:
        raise NotImplementedError

    def decode_vjp(self, h, g) -> np.ndarray:
        """Pull a pixel-space gradient ``g`` back to latent space at ``h``."""
        raise NotImplementedError

    def latent_shape(self, pixel_shape) -> tuple:
        raise NotImplementedError


class IdentityCodec(LatentCodec):
    """Latent space equals pixel space."""

    def encode(self, x):
        return np.array(x, dtype=np.float64)

    def decode(self, h):
        return np.array(h, dtype=np.float64)

    def decode_vjp(self, h, g):
        h = np.asarray(h)
        g = np.array(g, dtype=np.float64)
        if g.shape != h.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match latent shape {h.shape}")
        return g

    def latent_shape(self, pixel_shape):
        return tuple(pixel_shape)

    def __repr__(self):
        return "IdentityCodec()"


class LinearPoolCodec(LatentCodec):
    """``factor x factor`` average pooling down, nearest-neighbour upsampling back.

    Operates on the two leading (spatial) axes of ``(H, W, C)`` arrays.
    """

    def __init__(self, factor: int = 2):
        factor = int(factor)
        if factor < 2:
            raise ValueError(f"factor must be >= 2, got {factor}")
        self.factor = factor

    def _check_pixels(self, shape):
        f = self.factor
        if len(shape) < 2 or shape[0] % f or shape[1] % f:
            raise ShapeError(
                f"spatial dims {tuple(shape[:2])} not divisible by pooling factor {f}"
            )

    def latent_shape(self, pixel_shape):
        self._check_pixels(pixel_shape)
        f = self.factor
        return (pixel_shape[0] // f, pixel_shape[1] // f) + tuple(pixel_shape[2:])

    def encode(self, x):
        x = np.asarray(x, dtype=np.float64)
        self._check_pixels(x.shape)
        f = self.factor
        h, w = x.shape[0] // f, x.shape[1] // f
        blocks = x.reshape((h, f, w, f) + x.shape[2:])
        return blocks.mean(axis=(1, 3))

    def decode(self, h):
        h = np.asarray(h, dtype=np.float64)
        f = self.factor
        return np.repeat(np.repeat(h, f, axis=0), f, axis=1)

    def decode_vjp(self, h, g):
        h = np.asarray(h)
        g = np.asarray(g, dtype=np.float64)
        f = self.factor
        expected = (h.shape[0] * f, h.shape[1] * f) + h.shape[2:]
        if g.shape != expected:
            raise ShapeError(f"gradient shape {g.shape} does not match decoded shape {expected}")
        # transpose of block replication: sum each block
        blocks = g.reshape((h.shape[0], f, h.shape[1], f) + h.shape[2:])
        return blocks.sum(axis=(1, 3))

    def __repr__(self):
        return f"LinearPoolCodec(factor={self.factor})"


def make_codec(kind: str = "identity", factor: int = 2) -> LatentCodec:
    if kind == "identity":
        return IdentityCodec()
    if kind == "pool":
        return LinearPoolCodec(factor)
    raise ValueError(f"codec kind must be 'identity' or 'pool', got {kind!r}")
