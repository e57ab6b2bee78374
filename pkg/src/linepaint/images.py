"""Image array helpers shared across the pipeline.

Conventions used throughout the package:
  - illustrations: float32 RGB arrays of shape (3, H, W) in [-1, 1]
  - line arts:     float32 grey arrays of shape (1, H, W) in [0, 1], 1 = paper
  - stroke layers: float32 RGBA arrays of shape (4, H, W), straight alpha
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

# ITU-R BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)


def uint8_to_unit(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float32) / 255.0


def unit_to_uint8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


def unit_to_pm1(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float32) * 2.0 - 1.0


def pm1_to_unit(arr: np.ndarray) -> np.ndarray:
    return (arr.astype(np.float32) + 1.0) / 2.0


def rgb_to_grey(rgb_unit: np.ndarray) -> np.ndarray:
    """BT.601 luma of an RGB array (3, H, W) in [0, 1] -> (1, H, W)."""
    grey = np.tensordot(LUMA_WEIGHTS, rgb_unit.astype(np.float64), axes=(0, 0))
    return grey[None].astype(np.float32)


def load_illustration(path) -> np.ndarray:
    """Load a PNG/JPEG file as an RGB illustration array in [-1, 1]."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        arr = np.asarray(rgb, dtype=np.uint8)
    return unit_to_pm1(uint8_to_unit(arr.transpose(2, 0, 1)))


def _open_bytes(data: bytes) -> Image.Image:
    """Open image bytes, mapping undecodable input to ValueError."""
    try:
        return Image.open(io.BytesIO(data))
    except (Image.UnidentifiedImageError, OSError, SyntaxError) as err:
        raise ValueError(f"undecodable image bytes: {err}") from err


def decode_line_art(data: bytes) -> np.ndarray:
    """Decode PNG/JPEG bytes into a (1, H, W) line art in [0, 1].

    RGB inputs are converted with BT.601 luma; alpha is flattened onto
    white paper first.
    """
    with _open_bytes(data) as img:
        if img.mode in ("RGBA", "LA", "PA"):
            img = img.convert("RGBA")
            white = Image.new("RGBA", img.size, (255, 255, 255, 255))
            img = Image.alpha_composite(white, img)
        if img.mode == "L":
            arr = np.asarray(img, dtype=np.uint8)
            return uint8_to_unit(arr)[None]
        rgb = np.asarray(img.convert("RGB"), dtype=np.uint8).transpose(2, 0, 1)
    return rgb_to_grey(uint8_to_unit(rgb))


def decode_strokes(data: bytes) -> np.ndarray:
    """Decode stroke-layer PNG bytes into a straight-alpha (4, H, W) array."""
    with _open_bytes(data) as img:
        arr = np.asarray(img.convert("RGBA"), dtype=np.uint8)
    return uint8_to_unit(arr.transpose(2, 0, 1))


def png_dimensions(data: bytes) -> tuple[int, int]:
    """Read (H, W) from image header bytes without decoding pixel data."""
    with _open_bytes(data) as img:
        w, h = img.size
    return h, w


def encode_rgb_png(pm1: np.ndarray) -> bytes:
    """Encode a (3, H, W) [-1, 1] array as PNG bytes (deterministic)."""
    arr = unit_to_uint8(pm1_to_unit(pm1)).transpose(1, 2, 0)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_line_art_png(line: np.ndarray, path) -> None:
    Image.fromarray(unit_to_uint8(line[0]), mode="L").save(path, format="PNG")


def save_illustration_png(pm1: np.ndarray, path) -> None:
    arr = unit_to_uint8(pm1_to_unit(pm1)).transpose(1, 2, 0)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def pad_to_multiple(arr: np.ndarray, multiple: int, value: float) -> tuple[np.ndarray, tuple[int, int]]:
    """Pad (C, H, W) on the bottom/right so H and W divide `multiple`.

    Returns the padded array and the original (H, W) for unpadding.
    """
    _, h, w = arr.shape
    ph = (multiple - h % multiple) % multiple
    pw = (multiple - w % multiple) % multiple
    if ph == 0 and pw == 0:
        return arr, (h, w)
    out = np.pad(arr, ((0, 0), (0, ph), (0, pw)), mode="constant", constant_values=value)
    return out, (h, w)


def unpad(arr: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    h, w = size
    return arr[:, :h, :w]


def resize_shortest_side(arr: np.ndarray, side: int) -> np.ndarray:
    """Bicubic-resize a (C, H, W) array so min(H, W) == side.

    Upscales when the image is smaller than the target side.
    """
    c, h, w = arr.shape
    scale = side / min(h, w)
    nh = max(side, int(round(h * scale)))
    nw = max(side, int(round(w * scale)))
    if (nh, nw) == (h, w):
        return arr.astype(np.float32)
    planes = [
        np.asarray(
            Image.fromarray(arr[i].astype(np.float32), mode="F").resize((nw, nh), Image.BICUBIC)
        )
        for i in range(c)
    ]
    return np.stack(planes).astype(np.float32)


def average_pool(arr: np.ndarray, factor: int) -> np.ndarray:
    """Non-overlapping average pooling of (C, H, W); H, W must divide factor."""
    c, h, w = arr.shape
    if h % factor or w % factor:
        raise ValueError(f"spatial size ({h}, {w}) not divisible by {factor}")
    view = arr.reshape(c, h // factor, factor, w // factor, factor)
    return view.mean(axis=(2, 4))


def stable_seed(*parts) -> int:
    """Derive a deterministic 63-bit seed from arbitrary parts (e.g. run seed
    plus a source id), independent of process hash randomization."""
    import hashlib

    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


__all__ = [
    "LUMA_WEIGHTS",
    "uint8_to_unit",
    "unit_to_uint8",
    "unit_to_pm1",
    "pm1_to_unit",
    "rgb_to_grey",
    "load_illustration",
    "decode_line_art",
    "decode_strokes",
    "png_dimensions",
    "encode_rgb_png",
    "save_line_art_png",
    "save_illustration_png",
    "pad_to_multiple",
    "unpad",
    "resize_shortest_side",
    "average_pool",
    "stable_seed",
]
