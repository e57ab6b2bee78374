"""Fréchet distance between perceptual-embedding Gaussians.

Image sets are embedded with a frozen perceptual network (spatially pooled
feature maps), summarized as a mean and covariance, and compared with

    d^2 = ||mu_a - mu_b||^2 + Tr(cov_a + cov_b - 2 (cov_a cov_b)^(1/2)).

The matrix square root is taken through an eigendecomposition of the
symmetrized product; tiny negative eigenvalues from rounding are clamped
to zero and the clamped fraction is reported alongside the value.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

log = logging.getLogger(__name__)


@dataclass
class GaussianSummary:
    mean: np.ndarray
    cov: np.ndarray
    count: int
    embed_tag: str

    def __post_init__(self):
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ValueError(f"covariance {self.cov.shape} does not match mean dim {d}")


@dataclass
class FidResult:
    value: float
    embed_tag: str
    count_a: int
    count_b: int
    clamped_fraction: float

    def to_dict(self) -> dict:
        return {"fid": self.value, "embed_tag": self.embed_tag,
                "count_a": self.count_a, "count_b": self.count_b,
                "clamped_fraction": self.clamped_fraction}


class GreyEmbeddingAdapter:
    """Feeds RGB sets through a line-art (single-channel) feature network.

    RGB in [-1, 1] is mapped to BT.601 luma in [0, 1] before embedding.
    """

    def __init__(self, net):
        self.net = net

    @property
    def architecture_tag(self) -> str:
        return self.net.architecture_tag + "/luma"

    def features(self, x: torch.Tensor) -> torch.Tensor:
        unit = (x + 1.0) / 2.0
        weights = torch.tensor([0.299, 0.587, 0.114], dtype=unit.dtype)
        grey = (unit * weights[None, :, None, None]).sum(dim=1, keepdim=True)
        return self.net.features(grey)


def embed_set(images, net) -> tuple[np.ndarray, str]:
    """Embed (3, H, W) images in [-1, 1] as pooled features, one row each."""
    rows = []
    with torch.no_grad():
        for image in images:
            x = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32))
            feat = net.features(x[None])
            rows.append(feat.mean(dim=(2, 3))[0].numpy().astype(np.float64))
    if not rows:
        raise ValueError("cannot embed an empty image set")
    return np.stack(rows), net.architecture_tag


def summarize(embeddings: np.ndarray, embed_tag: str) -> GaussianSummary:
    n, d = embeddings.shape
    if n < 2:
        raise ValueError(f"need at least 2 embeddings for a covariance, got {n}")
    if n <= d:
        warnings.warn(f"covariance from {n} samples in {d} dims is rank-deficient",
                      stacklevel=2)
    mean = embeddings.mean(axis=0)
    cov = np.cov(embeddings, rowvar=False)
    return GaussianSummary(mean=mean, cov=np.atleast_2d(cov), count=n, embed_tag=embed_tag)


def _sqrtm_psd(matrix: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh((matrix + matrix.T) / 2.0)
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> tuple[float, float]:
    """Squared Fréchet distance and the fraction of clamped eigenvalues."""
    if a.embed_tag != b.embed_tag:
        raise ValueError(
            f"summaries come from different embeddings: {a.embed_tag!r} vs {b.embed_tag!r}")
    if a.mean.shape != b.mean.shape:
        raise ValueError(f"dimension mismatch: {a.mean.shape} vs {b.mean.shape}")
    diff = a.mean - b.mean
    sqrt_a = _sqrtm_psd(a.cov)
    product = sqrt_a @ b.cov @ sqrt_a
    evals = np.linalg.eigvalsh((product + product.T) / 2.0)
    clamped = float(np.mean(evals < 0.0)) if evals.size else 0.0
    tr_sqrt = float(np.sqrt(np.clip(evals, 0.0, None)).sum())
    value = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * tr_sqrt)
    if clamped:
        log.info("clamped %.1f%% of product eigenvalues", 100.0 * clamped)
    return value, clamped


def fid_between_sets(images_a, images_b, net) -> FidResult:
    emb_a, tag = embed_set(images_a, net)
    emb_b, _ = embed_set(images_b, net)
    value, clamped = frechet_distance(summarize(emb_a, tag), summarize(emb_b, tag))
    return FidResult(value=value, embed_tag=tag, count_a=emb_a.shape[0],
                     count_b=emb_b.shape[0], clamped_fraction=clamped)


def auto_colorize_set(line_files, model, out_dir, max_side: int = 1024) -> dict:
    """Colorize every readable line art with zero hints; skip bad files.

    Writes `<stem>.png` per input plus a manifest of what was produced.
    """
    from .inference import colorize_bytes

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    produced, skipped = [], []
    for src in sorted(Path(p) for p in line_files):
        try:
            payload, _ = colorize_bytes(model, src.read_bytes(), None, max_side=max_side)
        except (OSError, ValueError) as err:
            log.warning("skipping %s: %s", src, err)
            skipped.append({"file": str(src), "reason": str(err)})
            continue
        dest = out_dir / f"{src.stem}.png"
        dest.write_bytes(payload)
        produced.append({"source": str(src), "output": dest.name})
    manifest = {"model_id": model.model_id, "produced": produced, "skipped": skipped}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest


__all__ = [
    "GaussianSummary",
    "FidResult",
    "embed_set",
    "summarize",
    "frechet_distance",
    "fid_between_sets",
    "auto_colorize_set",
]
