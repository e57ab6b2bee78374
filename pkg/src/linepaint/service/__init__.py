"""HTTP inference service around the colorization pipeline."""

from .app import create_app

__all__ = ["create_app"]
