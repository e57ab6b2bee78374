"""Synthetic training-pair forging and train-time augmentation.

Line arts are generated from illustrations with the XDoG filter; the blur
scale is drawn from {0.3, 0.4, 0.5} per pair so the network sees several
line widths.  Geometric augmentation is applied jointly to both elements
of a pair; darkness scaling applies to the line art only.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np

from .images import (
    load_illustration,
    pm1_to_unit,
    resize_shortest_side,
    rgb_to_grey,
    save_illustration_png,
    save_line_art_png,
    stable_seed,
)
from .xdog import XdogParams, xdog_filter

log = logging.getLogger(__name__)

SIGMA_CHOICES = (0.3, 0.4, 0.5)
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def synthesize_pair(illustration: np.ndarray, rng: np.random.Generator,
                    params: XdogParams = XdogParams()) -> tuple[np.ndarray, np.ndarray]:
    """Forge an aligned (line art, illustration) pair.

    The illustration is (3, H, W) in [-1, 1]; the returned line art is
    (1, H, W) in [0, 1] extracted at a blur scale drawn uniformly from
    SIGMA_CHOICES.
    """
    sigma = SIGMA_CHOICES[rng.integers(0, len(SIGMA_CHOICES))]
    grey = rgb_to_grey(pm1_to_unit(illustration))
    line = xdog_filter(grey, dataclasses.replace(params, sigma=sigma))
    return line, illustration


def darkness_scale(line: np.ndarray, lam: float) -> np.ndarray:
    """Rescale line darkness: x -> 1 - lam * (1 - x).

    lam = 1 is the identity; white (1) is a fixed point for any lam.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"darkness factor must lie in [0, 1], got {lam}")
    return (1.0 - lam * (1.0 - line)).astype(np.float32)


def augment(pair: tuple[np.ndarray, np.ndarray], rng: np.random.Generator,
            side: int = 128, darkness: tuple[float, float] = (0.7, 1.0)) -> tuple[np.ndarray, np.ndarray]:
    """Jointly resize/crop/flip a pair and randomize line darkness.

    Both images are resized so their shortest side equals `side` (upscaled
    when smaller), cropped to side x side with one shared window, and
    flipped horizontally together with probability 0.5.
    """
    if side < 64 or side % 16:
        raise ValueError(f"crop side must be >= 64 and divisible by 16, got {side}")
    line, illu = pair
    if line.shape[1:] != illu.shape[1:]:
        raise ValueError(f"pair is misaligned: {line.shape[1:]} vs {illu.shape[1:]}")

    line = np.clip(resize_shortest_side(line, side), 0.0, 1.0)
    illu = np.clip(resize_shortest_side(illu, side), -1.0, 1.0)

    _, h, w = line.shape
    top = int(rng.integers(0, h - side + 1))
    left = int(rng.integers(0, w - side + 1))
    line = line[:, top:top + side, left:left + side]
    illu = illu[:, top:top + side, left:left + side]

    if rng.random() < 0.5:
        line = line[:, :, ::-1]
        illu = illu[:, :, ::-1]

    lam = float(rng.uniform(*darkness))
    line = darkness_scale(np.ascontiguousarray(line), lam)
    return line, np.ascontiguousarray(illu)


def forge_directory(input_dir, output_dir, side: int, seed: int,
                    params: XdogParams = XdogParams()) -> dict:
    """Forge pairs for every image under `input_dir` and write a manifest.

    Each source image owns a seeded sub-stream derived from (seed, id), so
    results do not depend on processing order.  Pairs are saved as
    `<id>_line.png` / `<id>_color.png` at shortest side `side` (aspect
    preserved; crops happen at training time).
    """
    input_dir, output_dir = Path(input_dir), Path(output_dir)
    sources = sorted(p for p in input_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not sources:
        raise ValueError(f"no images found under {input_dir}")
    output_dir.mkdir(parents=True, exist_ok=True)

    entries = []
    for src in sources:
        source_id = src.stem
        rng = np.random.default_rng(stable_seed(seed, source_id))
        illu = load_illustration(src)
        illu = np.clip(resize_shortest_side(illu, side), -1.0, 1.0)
        line, illu = synthesize_pair(illu, rng, params)
        line_name, color_name = f"{source_id}_line.png", f"{source_id}_color.png"
        save_line_art_png(line, output_dir / line_name)
        save_illustration_png(illu, output_dir / color_name)
        entries.append({"id": source_id, "line": line_name, "color": color_name})

    manifest = {
        "seed": seed,
        "side": side,
        "params": dataclasses.asdict(params),
        "sigma_choices": list(SIGMA_CHOICES),
        "files": entries,
    }
    _atomic_write_json(output_dir / "manifest.json", manifest)
    return manifest


def load_forged_pairs(directory) -> list[dict]:
    """Load every forged pair listed in a directory's manifest.

    Returns dicts with keys id, line ((1,H,W) [0,1]) and color
    ((3,H,W) [-1,1]).
    """
    from .images import decode_line_art

    directory = Path(directory)
    with open(directory / "manifest.json") as fh:
        manifest = json.load(fh)
    pairs = []
    for entry in manifest["files"]:
        line = decode_line_art((directory / entry["line"]).read_bytes())
        color = load_illustration(directory / entry["color"])
        pairs.append({"id": entry["id"], "line": line, "color": color})
    if not pairs:
        raise ValueError(f"manifest in {directory} lists no pairs")
    return pairs


def _atomic_write_json(path: Path, payload: dict) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=2)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


__all__ = [
    "SIGMA_CHOICES",
    "synthesize_pair",
    "darkness_scale",
    "augment",
    "forge_directory",
    "load_forged_pairs",
]
