"""Generator and conditional critic networks.

The generator is a U-Net whose decoder half is built from four sub-networks
(ResNeXt block stacks followed by sub-pixel upsampling) operating at strides
16, 8, 4 and 2.  The line art enters at full resolution, the color hint at
quarter resolution and the frozen local-feature map at stride 16.  No
normalization layers are used anywhere; every hidden activation is
LeakyReLU(0.2) and the output saturates with tanh.

The critic mirrors the SRGAN layout without normalization, takes the same
local-feature map as conditional input at its stride-16 stage and ends in a
pooling head so it accepts any input side.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import torch
import torch.nn as nn


def pixel_shuffle(x: torch.Tensor, r: int) -> torch.Tensor:
    """Rearrange (N, c*r*r, h, w) into (N, c, h*r, w*r).

    out[c, y*r+dy, x*r+dx] = in[c*r*r + dy*r + dx, y, x].  Also accepts an
    unbatched (c*r*r, h, w) tensor.
    """
    squeeze = x.ndim == 3
    if squeeze:
        x = x.unsqueeze(0)
    n, crr, h, w = x.shape
    if crr % (r * r):
        raise ValueError(f"channel count {crr} is not divisible by r^2 = {r * r}")
    c = crr // (r * r)
    out = x.reshape(n, c, r, r, h, w).permute(0, 1, 4, 2, 5, 3).reshape(n, c, h * r, w * r)
    return out.squeeze(0) if squeeze else out


class PixelShuffle(nn.Module):
    def __init__(self, upscale: int):
        super().__init__()
        self.upscale = upscale

    def forward(self, x):
        return pixel_shuffle(x, self.upscale)

    def extra_repr(self):
        return f"upscale={self.upscale}"


class ResNeXtBlock(nn.Module):
    """1x1 reduce -> 3x3 grouped conv -> 1x1 expand with identity skip."""

    def __init__(self, channels: int, cardinality: int, dilation: int = 1):
        super().__init__()
        mid = channels // 2
        if mid % cardinality:
            raise ValueError(
                f"block width {channels} gives mid channels {mid}, "
                f"not divisible by cardinality {cardinality}")
        self.reduce = nn.Conv2d(channels, mid, 1)
        self.conv = nn.Conv2d(mid, mid, 3, padding=dilation, dilation=dilation,
                              groups=cardinality)
        self.expand = nn.Conv2d(mid, channels, 1)
        self.act = nn.LeakyReLU(0.2)

    def forward(self, x):
        y = self.act(self.reduce(x))
        y = self.act(self.conv(y))
        y = self.expand(y)
        return self.act(x + y)


@dataclass
class GeneratorConfig:
    base_width: int = 32
    block_counts: tuple[int, ...] = (4, 2, 2, 1)
    dilation_plan: tuple[int, ...] = (1, 2, 2, 2)
    cardinality: int = 16
    image_side: int = 128
    cond_channels: int = 128  # channels of the local-feature map

    def __post_init__(self):
        self.block_counts = tuple(self.block_counts)
        self.dilation_plan = tuple(self.dilation_plan)
        if len(self.block_counts) != 4:
            raise ValueError(f"block_counts must have 4 entries, got {self.block_counts}")
        if len(self.dilation_plan) != 4:
            raise ValueError(f"dilation_plan must have 4 entries, got {self.dilation_plan}")
        if self.image_side % 16:
            raise ValueError(f"image_side must divide 16, got {self.image_side}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DiscriminatorConfig:
    base_width: int = 32
    cond_channels: int = 128  # must equal the local-feature channels
    cardinality: int = 16
    extra_stages: int = 1  # strided stages past the conditioning point
    image_side: int = 128

    def __post_init__(self):
        if self.image_side < 16 * 2 ** self.extra_stages:
            raise ValueError(
                f"image_side {self.image_side} leaves no spatial extent after "
                f"stride {16 * 2 ** self.extra_stages}")

    def to_dict(self) -> dict:
        return asdict(self)


def _conv(cin, cout, stride=1):
    return nn.Sequential(nn.Conv2d(cin, cout, 3, stride=stride, padding=1), nn.LeakyReLU(0.2))


class Generator(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        w = config.base_width
        card = config.cardinality
        counts, dils = config.block_counts, config.dilation_plan

        self.front_line = _conv(1, w)            # stride 1
        self.down2 = _conv(w, 2 * w, stride=2)   # stride 2
        self.down4 = _conv(2 * w, 4 * w, stride=2)   # stride 4
        self.front_hint = _conv(4, 2 * w)        # stride 4 (hint is quarter-res)
        self.down8 = _conv(6 * w, 8 * w, stride=2)   # stride 8
        self.down16 = _conv(8 * w, 8 * w, stride=2)  # stride 16

        widths = (8 * w, 4 * w, 2 * w, w)
        skips = (config.cond_channels, 8 * w, 6 * w, 2 * w)
        self.fuse = nn.ModuleList(
            _conv(width + skip, width) for width, skip in zip(widths, skips))
        self.stages = nn.ModuleList(
            nn.Sequential(*[ResNeXtBlock(width, card, dil) for _ in range(count)])
            for width, count, dil in zip(widths, counts, dils))
        up_out = (4 * w, 2 * w, w, w)
        self.up = nn.ModuleList(
            nn.Sequential(nn.Conv2d(width, 4 * out, 1), PixelShuffle(2), nn.LeakyReLU(0.2))
            for width, out in zip(widths, up_out))

        self.final = nn.Sequential(nn.Conv2d(2 * w, 3, 3, padding=1), nn.Tanh())

    def forward(self, x: torch.Tensor, h: torch.Tensor, f: torch.Tensor) -> torch.Tensor:
        squeeze = x.ndim == 3
        if squeeze:
            x, h, f = x.unsqueeze(0), h.unsqueeze(0), f.unsqueeze(0)
        self._check_shapes(x, h, f)

        s1 = self.front_line(x)
        s2 = self.down2(s1)
        s4 = torch.cat([self.down4(s2), self.front_hint(h)], dim=1)
        s8 = self.down8(s4)
        s16 = self.down16(s8)

        y = s16
        for fuse, stage, up, skip in zip(self.fuse, self.stages, self.up, (f, s8, s4, s2)):
            y = up(stage(fuse(torch.cat([y, skip], dim=1))))
        out = self.final(torch.cat([y, s1], dim=1))
        return out.squeeze(0) if squeeze else out

    def _check_shapes(self, x, h, f):
        n, c, hh, ww = x.shape
        if c != 1:
            raise ValueError(f"line art must have 1 channel, got {c}")
        if hh % 16 or ww % 16:
            raise ValueError(f"line art side ({hh}, {ww}) must divide 16")
        if h.shape != (n, 4, hh // 4, ww // 4):
            raise ValueError(
                f"hint tensor shape {tuple(h.shape)} does not match "
                f"expected {(n, 4, hh // 4, ww // 4)} for line art {(hh, ww)}")
        expected_f = (n, self.config.cond_channels, hh // 16, ww // 16)
        if f.shape != torch.Size(expected_f):
            raise ValueError(
                f"feature map shape {tuple(f.shape)} does not match expected {expected_f}")


class Discriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        w = config.base_width
        card = config.cardinality

        self.front = _conv(3, w)
        self.encoder = nn.Sequential(
            _conv(w, 2 * w, stride=2), ResNeXtBlock(2 * w, card),
            _conv(2 * w, 4 * w, stride=2), ResNeXtBlock(4 * w, card),
            _conv(4 * w, 8 * w, stride=2), ResNeXtBlock(8 * w, card),
            _conv(8 * w, 8 * w, stride=2), ResNeXtBlock(8 * w, card),
        )
        self.fuse = _conv(8 * w + config.cond_channels, 8 * w)
        tail = [ResNeXtBlock(8 * w, card)]
        for _ in range(config.extra_stages):
            tail += [_conv(8 * w, 8 * w, stride=2), ResNeXtBlock(8 * w, card)]
        self.tail = nn.Sequential(*tail)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(8 * w, 1)

    def forward(self, img: torch.Tensor, f: torch.Tensor) -> torch.Tensor:
        squeeze = img.ndim == 3
        if squeeze:
            img, f = img.unsqueeze(0), f.unsqueeze(0)
        n, c, hh, ww = img.shape
        if c != 3:
            raise ValueError(f"critic input must have 3 channels, got {c}")
        if f.shape != (n, self.config.cond_channels, hh // 16, ww // 16):
            raise ValueError(
                f"feature map shape {tuple(f.shape)} does not match expected "
                f"{(n, self.config.cond_channels, hh // 16, ww // 16)}")
        y = self.tail(self.fuse(torch.cat([self.encoder(self.front(img)), f], dim=1)))
        score = self.head(self.pool(y).flatten(1)).squeeze(1)
        return score.squeeze(0) if squeeze else score


LEAKY_GAIN = math.sqrt(2.0 / (1.0 + 0.2 ** 2))


def init_weights(net: nn.Module, seed: int, gain: float = LEAKY_GAIN) -> nn.Module:
    """Scaled-normal initialization: std = gain / sqrt(fan_in), fixed seed."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for m in net.modules():
            if isinstance(m, nn.Conv2d):
                fan_in = m.in_channels // m.groups * m.kernel_size[0] * m.kernel_size[1]
                m.weight.normal_(0.0, gain / math.sqrt(fan_in), generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
            elif isinstance(m, nn.Linear):
                m.weight.normal_(0.0, gain / math.sqrt(m.in_features), generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
    return net


def count_parameters(net: nn.Module) -> int:
    return sum(p.numel() for p in net.parameters())


__all__ = [
    "pixel_shuffle",
    "PixelShuffle",
    "ResNeXtBlock",
    "GeneratorConfig",
    "DiscriminatorConfig",
    "Generator",
    "Discriminator",
    "init_weights",
    "count_parameters",
    "LEAKY_GAIN",
]
