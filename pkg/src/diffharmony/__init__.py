"""Guided diffusion sampling and color transfer for image harmonization."""

__version__ = "0.1.0"
