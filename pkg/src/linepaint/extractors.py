"""Frozen feature extractors conditioning the adversarial networks.

The local-feature network turns a line art into a stride-16 semantic map
that both generator and critic consume; because it is pretrained on a
tagging task and never updated during adversarial training, it does not
inherit the quirks of synthetic line arts.  The perceptual network embeds
RGB images at stride 4 for the content loss.

At desk scale both networks are small convnets pretrained on tags derived
automatically from each illustration (hue/saturation/line-density buckets),
standing in for the large pretrained taggers a production system would use.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn

from .networks import init_weights

CHECKPOINT_FORMAT_VERSION = 1

HUE_BINS = 6
SATURATION_BINS = 3
DENSITY_BINS = 3
TAG_COUNT = HUE_BINS + SATURATION_BINS + DENSITY_BINS


class ExtractorNotInitialized(RuntimeError):
    """Raised when features are requested before weights were loaded."""


def _as_batched(x, channels: int, dtype=torch.float32) -> tuple[torch.Tensor, bool]:
    if isinstance(x, np.ndarray):
        x = torch.from_numpy(np.ascontiguousarray(x))
    x = x.to(dtype)
    squeeze = x.ndim == 3
    if squeeze:
        x = x.unsqueeze(0)
    if x.ndim != 4 or x.shape[1] != channels:
        raise ValueError(f"expected (N, {channels}, H, W) input, got {tuple(x.shape)}")
    return x, squeeze


class _ExtractorBase(nn.Module):
    stride: int
    architecture_tag: str

    def __init__(self):
        super().__init__()
        self.initialized = False
        self.training_manifest: dict = {}

    def mark_initialized(self, manifest: dict | None = None):
        self.initialized = True
        if manifest is not None:
            self.training_manifest = manifest
        return self

    def init_random(self, seed: int):
        """Explicit seeded initialization (for tests and smoke runs)."""
        init_weights(self, seed)
        return self.mark_initialized({"init": "random", "seed": seed})

    def freeze(self):
        for p in self.parameters():
            p.requires_grad_(False)
        return self.eval()

    def _require_initialized(self):
        if not self.initialized:
            raise ExtractorNotInitialized(
                f"{type(self).__name__} weights were never loaded; load a checkpoint "
                "or call init_random()/pretraining explicitly")


@dataclass
class LocalFeatureConfig:
    base_width: int = 32
    out_channels: int = 128  # feature channels at stride 16

    def to_dict(self):
        return asdict(self)


class LocalFeatureNet(_ExtractorBase):
    """Six-convolution tagger backbone; features are the rectified output of
    the last convolution, at 1/16 resolution."""

    stride = 16

    def __init__(self, config: LocalFeatureConfig = LocalFeatureConfig(), n_tags: int = TAG_COUNT):
        super().__init__()
        self.config = config
        w = config.base_width
        self.backbone = nn.Sequential(
            nn.Conv2d(1, w, 3, 2, 1), nn.ReLU(),
            nn.Conv2d(w, 2 * w, 3, 2, 1), nn.ReLU(),
            nn.Conv2d(2 * w, 3 * w, 3, 1, 1), nn.ReLU(),
            nn.Conv2d(3 * w, 4 * w, 3, 2, 1), nn.ReLU(),
            nn.Conv2d(4 * w, 4 * w, 3, 1, 1), nn.ReLU(),
            nn.Conv2d(4 * w, config.out_channels, 3, 2, 1), nn.ReLU(),
        )
        self.tag_head = nn.Linear(config.out_channels, n_tags)

    @property
    def architecture_tag(self) -> str:
        return f"local-features-v1/w{self.config.base_width}/c{self.config.out_channels}"

    def features(self, x) -> torch.Tensor:
        """Line art (1, H, W) or (N, 1, H, W) -> stride-16 feature map."""
        self._require_initialized()
        x, squeeze = _as_batched(x, 1, next(self.parameters()).dtype)
        if x.shape[2] % 16 or x.shape[3] % 16:
            raise ValueError(f"input side {tuple(x.shape[2:])} must divide 16")
        out = self.backbone(x)
        return out.squeeze(0) if squeeze else out

    def forward(self, x):
        return self.features(x)

    def tag_logits(self, x) -> torch.Tensor:
        self._require_initialized()
        x, squeeze = _as_batched(x, 1, next(self.parameters()).dtype)
        pooled = self.backbone(x).mean(dim=(2, 3))
        logits = self.tag_head(pooled)
        return logits.squeeze(0) if squeeze else logits


@dataclass
class PerceptualConfig:
    base_width: int = 64
    out_channels: int = 128  # feature channels at stride 4

    def to_dict(self):
        return asdict(self)


class PerceptualFeatureNet(_ExtractorBase):
    """Four-convolution embedding; features are taken after the fourth
    rectified convolution, at 1/4 resolution."""

    stride = 4

    def __init__(self, config: PerceptualConfig = PerceptualConfig(), n_classes: int = HUE_BINS + 1):
        super().__init__()
        self.config = config
        w = config.base_width
        c = config.out_channels
        self.backbone = nn.Sequential(
            nn.Conv2d(3, w, 3, 2, 1), nn.ReLU(),
            nn.Conv2d(w, 2 * w, 3, 1, 1), nn.ReLU(),
            nn.Conv2d(2 * w, c, 3, 2, 1), nn.ReLU(),
            nn.Conv2d(c, c, 3, 1, 1), nn.ReLU(),
        )
        self.class_head = nn.Linear(c, n_classes)

    @property
    def architecture_tag(self) -> str:
        return f"perceptual-v1/w{self.config.base_width}/c{self.config.out_channels}"

    def features(self, img) -> torch.Tensor:
        """RGB image (3, H, W) or (N, 3, H, W) in [-1, 1] -> stride-4 features."""
        self._require_initialized()
        img, squeeze = _as_batched(img, 3, next(self.parameters()).dtype)
        out = self.backbone(img)
        return out.squeeze(0) if squeeze else out

    def forward(self, img):
        return self.features(img)

    def class_logits(self, img) -> torch.Tensor:
        self._require_initialized()
        img, squeeze = _as_batched(img, 3, next(self.parameters()).dtype)
        logits = self.class_head(self.backbone(img).mean(dim=(2, 3)))
        return logits.squeeze(0) if squeeze else logits


# ---------------------------------------------------------------------------
# automatic tag derivation for the desk-scale pretraining task


def rgb_to_hsv(rgb_unit: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized RGB [0,1] (3, H, W) -> hue [0,1), saturation, value."""
    r, g, b = rgb_unit[0], rgb_unit[1], rgb_unit[2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    delta = maxc - minc
    sat = np.where(maxc > 0, delta / np.maximum(maxc, 1e-12), 0.0)

    hue = np.zeros_like(maxc)
    safe = np.where(delta > 0, delta, 1.0)
    hue = np.where(maxc == r, ((g - b) / safe) % 6.0, hue)
    hue = np.where((maxc == g) & (maxc != r), (b - r) / safe + 2.0, hue)
    hue = np.where((maxc == b) & (maxc != r) & (maxc != g), (r - g) / safe + 4.0, hue)
    hue = np.where(delta > 0, hue / 6.0, 0.0)
    return hue, sat, maxc


def derive_tags(illustration: np.ndarray, line_art: np.ndarray) -> np.ndarray:
    """Multi-hot tags: dominant hue bins, mean-saturation bin, line density bin."""
    rgb = (illustration.astype(np.float32) + 1.0) / 2.0
    hue, sat, val = rgb_to_hsv(rgb)

    tags = np.zeros(TAG_COUNT, dtype=np.float32)
    chromatic = (sat > 0.15) & (val > 0.15)
    if chromatic.any():
        bins = np.minimum((hue[chromatic] * HUE_BINS).astype(int), HUE_BINS - 1)
        hist = np.bincount(bins, minlength=HUE_BINS) / bins.size
        tags[:HUE_BINS] = hist >= 0.2

    mean_sat = float(sat.mean())
    sat_bin = 0 if mean_sat < 0.15 else (1 if mean_sat < 0.4 else 2)
    tags[HUE_BINS + sat_bin] = 1.0

    density = float((line_art < 0.5).mean())
    dens_bin = 0 if density < 0.02 else (1 if density < 0.08 else 2)
    tags[HUE_BINS + SATURATION_BINS + dens_bin] = 1.0
    return tags


def dominant_hue_class(illustration: np.ndarray) -> int:
    """Single-label surrogate for perceptual-network pretraining: the most
    frequent hue bin, or HUE_BINS for achromatic images."""
    rgb = (illustration.astype(np.float32) + 1.0) / 2.0
    hue, sat, val = rgb_to_hsv(rgb)
    chromatic = (sat > 0.15) & (val > 0.15)
    if not chromatic.any():
        return HUE_BINS
    bins = np.minimum((hue[chromatic] * HUE_BINS).astype(int), HUE_BINS - 1)
    return int(np.bincount(bins, minlength=HUE_BINS).argmax())


# ---------------------------------------------------------------------------
# pretraining


@dataclass
class PretrainConfig:
    epochs: int = 8
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    holdout_fraction: float = 0.1
    min_corpus: int = 200


def pretrain_f1(samples, config: PretrainConfig = PretrainConfig(),
                net: LocalFeatureNet | None = None) -> tuple[LocalFeatureNet, dict]:
    """Pretrain the local-feature network on (line art, multi-hot tags) pairs.

    Deterministic under (seed, corpus); returns the trained net and a
    history manifest with the held-out loss curve.
    """
    samples = list(samples)
    if len(samples) < config.min_corpus:
        raise ValueError(
            f"pretraining corpus has {len(samples)} samples; at least "
            f"{config.min_corpus} are required for a usable tagger")

    net = net or LocalFeatureNet()
    init_weights(net, config.seed)
    net.train()

    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(samples))
    n_val = max(1, int(len(samples) * config.holdout_fraction))
    val_idx, train_idx = order[:n_val], order[n_val:]

    xs = torch.from_numpy(np.stack([samples[i][0] for i in range(len(samples))])).float()
    ys = torch.from_numpy(np.stack([samples[i][1] for i in range(len(samples))])).float()

    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    loss_fn = nn.BCEWithLogitsLoss()
    val_curve, train_curve = [], []
    for _ in range(config.epochs):
        perm = rng.permutation(train_idx)
        epoch_loss = 0.0
        for start in range(0, len(perm), config.batch_size):
            idx = perm[start:start + config.batch_size]
            opt.zero_grad()
            logits = net.tag_head(net.backbone(xs[idx]).mean(dim=(2, 3)))
            loss = loss_fn(logits, ys[idx])
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach()) * len(idx)
        train_curve.append(epoch_loss / len(perm))
        with torch.no_grad():
            logits = net.tag_head(net.backbone(xs[val_idx]).mean(dim=(2, 3)))
            val_curve.append(float(loss_fn(logits, ys[val_idx])))

    manifest = {
        "task": "auto-derived illustration tags",
        "corpus_size": len(samples),
        "seed": config.seed,
        "epochs": config.epochs,
        "train_loss": train_curve,
        "val_loss": val_curve,
    }
    net.mark_initialized(manifest)
    return net.eval(), manifest


def pretrain_f2(images, config: PretrainConfig = PretrainConfig(),
                net: PerceptualFeatureNet | None = None) -> tuple[PerceptualFeatureNet, dict]:
    """Pretrain the perceptual network on the dominant-hue surrogate task."""
    images = list(images)
    if len(images) < config.min_corpus:
        raise ValueError(
            f"pretraining corpus has {len(images)} samples; at least "
            f"{config.min_corpus} are required")

    net = net or PerceptualFeatureNet()
    init_weights(net, config.seed)
    net.train()

    labels = np.array([dominant_hue_class(img) for img in images], dtype=np.int64)
    xs = torch.from_numpy(np.stack(images)).float()
    ys = torch.from_numpy(labels)

    rng = np.random.default_rng(config.seed)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    loss_fn = nn.CrossEntropyLoss()
    curve = []
    for _ in range(config.epochs):
        perm = rng.permutation(len(images))
        epoch_loss = 0.0
        for start in range(0, len(perm), config.batch_size):
            idx = perm[start:start + config.batch_size]
            opt.zero_grad()
            loss = loss_fn(net.class_head(net.backbone(xs[idx]).mean(dim=(2, 3))), ys[idx])
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach()) * len(idx)
        curve.append(epoch_loss / len(images))

    manifest = {"task": "dominant hue class", "corpus_size": len(images),
                "seed": config.seed, "train_loss": curve}
    net.mark_initialized(manifest)
    return net.eval(), manifest


# ---------------------------------------------------------------------------
# checkpoint container


def save_extractor_checkpoint(net: _ExtractorBase, path) -> None:
    """Versioned container: architecture tag, weight blobs, training manifest."""
    net._require_initialized()
    torch.save({
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "architecture_tag": net.architecture_tag,
        "config": net.config.to_dict(),
        "state": net.state_dict(),
        "training_manifest": net.training_manifest,
    }, path)


def load_extractor_checkpoint(path, kind: str):
    """Load an extractor checkpoint; `kind` is 'f1' or 'f2'."""
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format in {path}")
    tag = blob["architecture_tag"]
    if kind == "f1":
        if not tag.startswith("local-features-"):
            raise ValueError(f"checkpoint {path} holds '{tag}', expected a local-features net")
        net = LocalFeatureNet(LocalFeatureConfig(**blob["config"]))
    elif kind == "f2":
        if not tag.startswith("perceptual-"):
            raise ValueError(f"checkpoint {path} holds '{tag}', expected a perceptual net")
        net = PerceptualFeatureNet(PerceptualConfig(**blob["config"]))
    else:
        raise ValueError(f"unknown extractor kind {kind!r}")
    net.load_state_dict(blob["state"])
    net.mark_initialized(blob.get("training_manifest", {}))
    return net.eval()


__all__ = [
    "ExtractorNotInitialized",
    "LocalFeatureConfig",
    "LocalFeatureNet",
    "PerceptualConfig",
    "PerceptualFeatureNet",
    "PretrainConfig",
    "pretrain_f1",
    "pretrain_f2",
    "derive_tags",
    "dominant_hue_class",
    "rgb_to_hsv",
    "TAG_COUNT",
    "HUE_BINS",
    "save_extractor_checkpoint",
    "load_extractor_checkpoint",
]
