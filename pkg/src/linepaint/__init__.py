"""Stroke-guided line art colorization: dataset forging, conditional
adversarial training, FID evaluation and an interactive inference service."""

__version__ = "0.1.0"
