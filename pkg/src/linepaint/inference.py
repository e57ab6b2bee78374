"""Colorization inference: checkpoint loading and the file-to-file pipeline.

The same `colorize_bytes` call backs both the CLI and the HTTP service, so
the two produce byte-identical PNGs for identical inputs.
"""

from __future__ import annotations

import time
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .extractors import LocalFeatureConfig, LocalFeatureNet
from .hints import HintTensor, preprocess_user_strokes
from .images import (
    decode_line_art,
    decode_strokes,
    encode_rgb_png,
    pad_to_multiple,
    pm1_to_unit,
    png_dimensions,
    unit_to_pm1,
    unpad,
)
from .networks import Generator, GeneratorConfig
from .training import TrainConfig, load_checkpoint_blob

DEFAULT_MAX_SIDE = 1024


class DecodeFailure(ValueError):
    """Input bytes are not a decodable PNG of the expected kind."""


class DimensionMismatch(ValueError):
    """Stroke canvas does not match the line-art canvas."""


class ImageTooLarge(ValueError):
    """Either image side exceeds the configured maximum."""


class ModelNotFound(KeyError):
    """No checkpoint with the requested id in the model directory."""


@dataclass
class LoadedModel:
    model_id: str
    generator: Generator
    f1: LocalFeatureNet
    config: TrainConfig
    iteration: int


def load_gan_checkpoint(path, model_id: str | None = None) -> LoadedModel:
    path = Path(path)
    blob = load_checkpoint_blob(path)
    config = TrainConfig.from_dict(blob["config"])
    generator = Generator(config.generator)
    generator.load_state_dict(blob["generator"])
    generator.eval()
    for p in generator.parameters():
        p.requires_grad_(False)
    f1 = LocalFeatureNet(LocalFeatureConfig(**blob["f1"]["config"]))
    f1.load_state_dict(blob["f1"]["state"])
    f1.mark_initialized({"source": "checkpoint"})
    f1.freeze()
    return LoadedModel(model_id=model_id or path.stem, generator=generator,
                       f1=f1, config=config, iteration=blob["iteration"])


class ModelStore:
    """Read-only LRU cache over the checkpoints in one directory.

    Model ids are checkpoint file stems; at most `capacity` models stay
    resident at a time.
    """

    def __init__(self, model_dir, capacity: int = 2):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.model_dir = Path(model_dir)
        self.capacity = capacity
        self._loaded: OrderedDict[str, LoadedModel] = OrderedDict()

    def list_models(self) -> list[str]:
        if not self.model_dir.is_dir():
            return []
        return sorted(p.stem for p in self.model_dir.glob("*.pt"))

    def loaded_ids(self) -> list[str]:
        return list(self._loaded)

    def describe(self, model_id: str) -> dict:
        """Config summary straight from the checkpoint, without caching it."""
        path = self.model_dir / f"{model_id}.pt"
        if not path.is_file():
            raise ModelNotFound(model_id)
        blob = load_checkpoint_blob(path)
        config = blob["config"]
        return {"model_id": model_id, "iteration": blob["iteration"],
                "image_side": config["image_side"],
                "generator_width": config["generator"]["base_width"]}

    def get(self, model_id: str) -> LoadedModel:
        if model_id in self._loaded:
            self._loaded.move_to_end(model_id)
            return self._loaded[model_id]
        path = self.model_dir / f"{model_id}.pt"
        if not path.is_file():
            raise ModelNotFound(model_id)
        model = load_gan_checkpoint(path, model_id=model_id)
        self._loaded[model_id] = model
        while len(self._loaded) > self.capacity:
            self._loaded.popitem(last=False)
        return model


def build_hint(strokes: np.ndarray | None, hw: tuple[int, int]) -> HintTensor:
    """Stroke canvas to quarter-resolution hints; no strokes means all zeros."""
    if strokes is None:
        return HintTensor.zeros(hw[0] // 4, hw[1] // 4)
    return preprocess_user_strokes(strokes, expect_hw=hw)


def colorize_array(model: LoadedModel, line_art: np.ndarray,
                   strokes: np.ndarray | None = None) -> np.ndarray:
    """Colorize one (1, H, W) line art in [0, 1]; returns (3, H, W) in [0, 1].

    Sides are padded up to multiples of 16 (white paper, transparent
    strokes) and the padding is cropped off the output.
    """
    if line_art.ndim != 3 or line_art.shape[0] != 1:
        raise ValueError(f"expected line art shaped (1, H, W), got {line_art.shape}")
    if strokes is not None and strokes.shape[1:] != line_art.shape[1:]:
        raise DimensionMismatch(
            f"stroke canvas {strokes.shape[1:]} does not match line art {line_art.shape[1:]}")
    padded, original_hw = pad_to_multiple(line_art, 16, value=1.0)
    if strokes is not None:
        strokes, _ = pad_to_multiple(strokes, 16, value=0.0)
    hint = build_hint(strokes, padded.shape[1:])
    x = torch.from_numpy(padded[None])
    h = torch.from_numpy(hint.to_array()[None])
    with torch.no_grad():
        f = model.f1.features(x)
        y = model.generator(x, h, f)
    out = unpad(y[0].numpy(), original_hw)
    return pm1_to_unit(out)


def colorize_bytes(model: LoadedModel, line_png: bytes,
                   strokes_png: bytes | None = None,
                   max_side: int = DEFAULT_MAX_SIDE) -> tuple[bytes, dict]:
    """Full PNG-to-PNG pipeline with size checks before any pixel decode."""
    t0 = time.perf_counter()
    try:
        h, w = png_dimensions(line_png)
    except ValueError as err:
        raise DecodeFailure(f"line art is not a PNG: {err}") from err
    if max(w, h) > max_side:
        raise ImageTooLarge(f"line art is {w}x{h}; maximum side is {max_side}")
    if strokes_png is not None:
        try:
            sh, sw = png_dimensions(strokes_png)
        except ValueError as err:
            raise DecodeFailure(f"stroke image is not a PNG: {err}") from err
        if (sw, sh) != (w, h):
            raise DimensionMismatch(
                f"stroke canvas {sw}x{sh} does not match line art {w}x{h}")
    try:
        line = decode_line_art(line_png)
    except ValueError as err:
        raise DecodeFailure(str(err)) from err
    strokes = None
    if strokes_png is not None:
        try:
            strokes = decode_strokes(strokes_png)
        except ValueError as err:
            raise DecodeFailure(str(err)) from err
    rgb = colorize_array(model, line, strokes)
    payload = encode_rgb_png(unit_to_pm1(rgb))
    meta = {"model_id": model.model_id, "width": w, "height": h,
            "elapsed_ms": (time.perf_counter() - t0) * 1e3}
    return payload, meta


__all__ = [
    "DEFAULT_MAX_SIDE",
    "DecodeFailure",
    "DimensionMismatch",
    "ImageTooLarge",
    "ModelNotFound",
    "LoadedModel",
    "ModelStore",
    "load_gan_checkpoint",
    "build_hint",
    "colorize_array",
    "colorize_bytes",
]
