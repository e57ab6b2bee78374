"""Alternating adversarial training loop.

Every iteration performs exactly one critic update followed by one
generator update on the same minibatch (the drift penalty is what makes
the 1:1 alternation stable).  All randomness — batch composition, crops,
flips, darkness scaling, hint sampling and interpolation draws — comes
from one seeded stream, so a run is reproducible bit-exactly and resuming
from a checkpoint continues the original trajectory.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from .forge import augment
from .hints import sample_training_hints
from .losses import (
    LossReport,
    LossWeights,
    NonFiniteLoss,
    adversarial_loss_g,
    combine_losses,
    content_loss,
    critic_loss,
    gradient_penalty,
    interpolate,
)
from .networks import (
    Discriminator,
    DiscriminatorConfig,
    Generator,
    GeneratorConfig,
    init_weights,
)

CHECKPOINT_FORMAT_VERSION = 1
GAN_ARCHITECTURE_TAG = "colorizer-gan-v1"


class TrainingAborted(RuntimeError):
    """Raised when a run stops on a non-finite loss or resource failure."""


@dataclass
class TrainConfig:
    # optimization schedule
    lr_initial: float = 1e-4
    lr_after_drop: float = 1e-5
    drop_iteration: int = 125_000
    total_iterations: int = 250_000
    batch_size: int = 4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.9
    # data
    image_side: int = 128
    darkness_range: tuple[float, float] = (0.7, 1.0)
    seed: int = 0
    # networks and objectives
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    loss_weights: LossWeights = field(default_factory=LossWeights)
    # bookkeeping
    checkpoint_every: int = 1000

    def __post_init__(self):
        if self.drop_iteration >= self.total_iterations:
            raise ValueError(
                f"drop_iteration {self.drop_iteration} must be below "
                f"total_iterations {self.total_iterations}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.image_side % 16:
            raise ValueError(f"image_side must divide 16, got {self.image_side}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "TrainConfig":
        payload = dict(payload)
        if "generator" in payload:
            payload["generator"] = GeneratorConfig(**payload["generator"])
        if "discriminator" in payload:
            payload["discriminator"] = DiscriminatorConfig(**payload["discriminator"])
        if "loss_weights" in payload:
            payload["loss_weights"] = LossWeights(**payload["loss_weights"])
        if "darkness_range" in payload:
            payload["darkness_range"] = tuple(payload["darkness_range"])
        return cls(**payload)


def learning_rate(config: TrainConfig, iteration: int) -> float:
    """Step schedule: the drop applies from `drop_iteration` onwards."""
    return config.lr_initial if iteration < config.drop_iteration else config.lr_after_drop


def parameter_digest(net: torch.nn.Module) -> str:
    """Order-stable SHA-256 over all parameter bytes (frozen-weight checks)."""
    digest = hashlib.sha256()
    for name, param in sorted(net.state_dict().items()):
        digest.update(name.encode())
        digest.update(param.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


class Trainer:
    """Owns the networks, optimizers and the run's random stream."""

    def __init__(self, config: TrainConfig, dataset: list[dict],
                 f1, f2, out_dir=None):
        if not dataset:
            raise ValueError("dataset is empty; nothing to train on")
        for ext, name in ((f1, "local-feature"), (f2, "perceptual")):
            if not getattr(ext, "initialized", False):
                raise ValueError(f"{name} extractor is not initialized")
        self.config = config
        self.dataset = dataset
        self.f1 = f1.freeze()
        self.f2 = f2.freeze()
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

        self.generator = init_weights(Generator(config.generator), config.seed)
        self.discriminator = init_weights(Discriminator(config.discriminator), config.seed + 1)
        betas = (config.adam_beta1, config.adam_beta2)
        self.opt_g = torch.optim.Adam(self.generator.parameters(), lr=config.lr_initial, betas=betas)
        self.opt_d = torch.optim.Adam(self.discriminator.parameters(), lr=config.lr_initial, betas=betas)
        self.rng = np.random.default_rng(config.seed)
        self.iteration = 0
        self.last_checkpoint: Path | None = None
        self._last_scores = (0.0, 0.0)

    # ----------------------------------------------------------------- data

    def sample_batch(self):
        """Draw, augment and hint one minibatch from the seeded stream."""
        cfg = self.config
        idx = self.rng.integers(0, len(self.dataset), size=cfg.batch_size)
        lines, colors, hints = [], [], []
        for i in idx:
            pair = self.dataset[int(i)]
            line, color = augment((pair["line"], pair["color"]), self.rng,
                                  side=cfg.image_side, darkness=cfg.darkness_range)
            hint = sample_training_hints(color, self.rng)
            lines.append(line)
            colors.append(color)
            hints.append(hint.to_array())
        x = torch.from_numpy(np.stack(lines))
        y = torch.from_numpy(np.stack(colors))
        h = torch.from_numpy(np.stack(hints))
        with torch.no_grad():
            f = self.f1.features(x)
        return x, h, f, y

    # ---------------------------------------------------------------- steps

    def train_step(self, batch) -> LossReport:
        """One critic update then one generator update on the same batch."""
        x, h, f, y = batch
        cfg = self.config
        weights = cfg.loss_weights
        lr = learning_rate(cfg, self.iteration)
        for opt in (self.opt_g, self.opt_d):
            for group in opt.param_groups:
                group["lr"] = lr

        # critic update
        with torch.no_grad():
            fake = self.generator(x, h, f)
        real_scores = self.discriminator(y, f)
        fake_scores = self.discriminator(fake, f)
        critic = critic_loss(fake_scores, real_scores)
        eps = torch.from_numpy(self.rng.random(x.shape[0]).astype(np.float32))
        interp = interpolate(fake, y, eps)
        grad_pen = weights.lambda_gp * gradient_penalty(self.discriminator, interp, f)
        drift = weights.eps_drift * real_scores.pow(2).mean()
        d_total = critic + grad_pen + drift
        if not torch.isfinite(d_total):
            raise NonFiniteLoss(f"critic total is {float(d_total.detach())} at iteration {self.iteration}")
        self.opt_d.zero_grad()
        d_total.backward()
        self.opt_d.step()

        # generator update (pure perceptual regression when lambda_adv == 0)
        fake = self.generator(x, h, f)
        content = content_loss(self.f2, fake, y)
        if weights.lambda_adv > 0:
            adv_g = adversarial_loss_g(self.discriminator(fake, f))
            g_total = content + weights.lambda_adv * adv_g
        else:
            adv_g = torch.zeros(())
            g_total = content
        if not torch.isfinite(g_total):
            raise NonFiniteLoss(f"generator total is {float(g_total.detach())} at iteration {self.iteration}")
        self.opt_g.zero_grad()
        g_total.backward()
        self.opt_g.step()

        self.iteration += 1
        report = combine_losses(content.detach(), adv_g.detach(), critic.detach(),
                                grad_pen.detach(), drift.detach(), weights)
        self._last_scores = (float(real_scores.detach().mean()),
                             float(fake_scores.detach().mean()))
        return report

    # ------------------------------------------------------------------ run

    def fit(self, max_iterations: int | None = None):
        """Run until `total_iterations` (or `max_iterations`), checkpointing
        every `checkpoint_every` steps and appending one metrics line per
        iteration.  Yields nothing; returns the final checkpoint path."""
        cfg = self.config
        stop = cfg.total_iterations if max_iterations is None else max_iterations
        metrics_path = self.out_dir / "metrics.jsonl" if self.out_dir else None
        try:
            while self.iteration < stop:
                t0 = time.perf_counter()
                report = self.train_step(self.sample_batch())
                wall_ms = (time.perf_counter() - t0) * 1e3
                if metrics_path is not None:
                    record = {"iteration": self.iteration, **report.to_dict(),
                              "d_real": self._last_scores[0], "d_fake": self._last_scores[1],
                              "lr": learning_rate(cfg, self.iteration - 1),
                              "wall_ms": round(wall_ms, 3)}
                    with open(metrics_path, "a") as fh:
                        fh.write(json.dumps(record) + "\n")
                if self.out_dir is not None and (
                        self.iteration % cfg.checkpoint_every == 0 or self.iteration == stop):
                    self.last_checkpoint = self.save_checkpoint(
                        self.out_dir / f"ckpt_{self.iteration:07d}.pt")
        except NonFiniteLoss as err:
            self._write_abort_diagnostic(str(err))
            raise TrainingAborted(str(err)) from err
        except RuntimeError as err:
            if "out of memory" in str(err).lower():
                hint = ("out of memory: reduce image_side or the generator "
                        "block_counts/base_width and retry")
                self._write_abort_diagnostic(f"{err} — {hint}")
                raise TrainingAborted(hint) from err
            raise
        return self.last_checkpoint

    def _write_abort_diagnostic(self, message: str):
        if self.out_dir is None:
            return
        payload = {"iteration": self.iteration, "error": message,
                   "last_good_checkpoint": str(self.last_checkpoint) if self.last_checkpoint else None}
        with open(self.out_dir / "abort_diagnostic.json", "w") as fh:
            json.dump(payload, fh, indent=2)

    # --------------------------------------------------------- persistence

    def save_checkpoint(self, path) -> Path:
        path = Path(path)
        tmp = path.with_suffix(path.suffix + ".tmp")
        torch.save({
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "architecture_tag": GAN_ARCHITECTURE_TAG,
            "iteration": self.iteration,
            "config": self.config.to_dict(),
            "generator": self.generator.state_dict(),
            "discriminator": self.discriminator.state_dict(),
            "opt_g": self.opt_g.state_dict(),
            "opt_d": self.opt_d.state_dict(),
            "f1": {"tag": self.f1.architecture_tag, "config": self.f1.config.to_dict(),
                   "state": self.f1.state_dict()},
            "f2": {"tag": self.f2.architecture_tag, "config": self.f2.config.to_dict(),
                   "state": self.f2.state_dict()},
            "numpy_rng": self.rng.bit_generator.state,
            "torch_rng": torch.get_rng_state(),
        }, tmp)
        tmp.replace(path)
        return path

    @classmethod
    def resume(cls, checkpoint_path, dataset: list[dict], out_dir=None) -> "Trainer":
        """Rebuild a trainer that continues the checkpointed run bit-exactly."""
        blob = load_checkpoint_blob(checkpoint_path)
        from .extractors import (LocalFeatureConfig, LocalFeatureNet,
                                 PerceptualConfig, PerceptualFeatureNet)

        config = TrainConfig.from_dict(blob["config"])
        f1 = LocalFeatureNet(LocalFeatureConfig(**blob["f1"]["config"]))
        f1.load_state_dict(blob["f1"]["state"])
        f1.mark_initialized({"source": "checkpoint"})
        f2 = PerceptualFeatureNet(PerceptualConfig(**blob["f2"]["config"]))
        f2.load_state_dict(blob["f2"]["state"])
        f2.mark_initialized({"source": "checkpoint"})

        trainer = cls(config, dataset, f1, f2, out_dir=out_dir)
        trainer.generator.load_state_dict(blob["generator"])
        trainer.discriminator.load_state_dict(blob["discriminator"])
        trainer.opt_g.load_state_dict(blob["opt_g"])
        trainer.opt_d.load_state_dict(blob["opt_d"])
        trainer.rng.bit_generator.state = blob["numpy_rng"]
        torch.set_rng_state(blob["torch_rng"])
        trainer.iteration = blob["iteration"]
        return trainer


def load_checkpoint_blob(path) -> dict:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format in {path}")
    if blob.get("architecture_tag") != GAN_ARCHITECTURE_TAG:
        raise ValueError(f"{path} is not a colorizer checkpoint "
                         f"(tag {blob.get('architecture_tag')!r})")
    return blob


__all__ = [
    "TrainConfig",
    "Trainer",
    "TrainingAborted",
    "learning_rate",
    "parameter_digest",
    "load_checkpoint_blob",
    "GAN_ARCHITECTURE_TAG",
]
