"""Training objectives.

Generator: perceptual content term plus a small adversarial term,
  L_G = L_cont + lambda_adv * L_adv,   L_adv = -E[D(fake, F)].
Critic: Wasserstein difference plus gradient and drift penalties,
  L_D = E[D(fake, F)] - E[D(real, F)]
        + lambda_gp * E[(||grad_y D(y_hat, F)||_2 - 1)^2]
        + eps_drift * E[D(real, F)^2],
with y_hat drawn on straight lines between real and generated images.
The drift term keeps critic scores near zero, which is what allows the
1:1 generator/critic alternation instead of the classic 5:1 schedule.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch


class NonFiniteLoss(RuntimeError):
    """A loss or penalty gradient stopped being finite."""


@dataclass(frozen=True)
class LossWeights:
    lambda_adv: float = 1e-4   # generator adversarial weight
    lambda_gp: float = 10.0    # gradient-penalty weight
    eps_drift: float = 1e-3    # drift-penalty weight

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")


@dataclass
class LossReport:
    content: float
    adv_g: float
    critic: float
    grad_penalty: float
    drift: float
    total_g: float
    total_d: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "LossReport":
        return cls(**payload)


def content_loss(perceptual, gen: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
    """Mean squared distance between frozen perceptual embeddings,
    normalized by the feature-map element count."""
    if gen.shape != truth.shape:
        raise ValueError(f"generated {tuple(gen.shape)} and truth {tuple(truth.shape)} differ")
    diff = perceptual.features(gen) - perceptual.features(truth)
    return diff.pow(2).mean()


def adversarial_loss_g(fake_scores: torch.Tensor) -> torch.Tensor:
    """Negative mean critic score of generated images."""
    if fake_scores.numel() == 0:
        raise ValueError("empty score batch")
    return -fake_scores.mean()


def critic_loss(fake_scores: torch.Tensor, real_scores: torch.Tensor) -> torch.Tensor:
    """Wasserstein critic objective: mean(fake) - mean(real)."""
    if fake_scores.numel() == 0 or real_scores.numel() == 0:
        raise ValueError("empty score batch")
    if fake_scores.shape != real_scores.shape:
        raise ValueError(
            f"batch sizes differ: fake {tuple(fake_scores.shape)} vs real {tuple(real_scores.shape)}")
    return fake_scores.mean() - real_scores.mean()


def interpolate(fake: torch.Tensor, real: torch.Tensor, eps) -> torch.Tensor:
    """Points on straight lines between generated and real images.

    `eps` is a scalar or a per-item tensor broadcastable to the batch.
    """
    if fake.shape != real.shape:
        raise ValueError(f"fake {tuple(fake.shape)} and real {tuple(real.shape)} differ")
    if not torch.is_tensor(eps):
        eps = torch.as_tensor(eps, dtype=fake.dtype)
    while eps.ndim < fake.ndim:
        eps = eps.unsqueeze(-1)
    return eps * fake + (1.0 - eps) * real


def gradient_penalty(critic, interp: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
    """Squared hinge of the per-item critic gradient norm to 1.

    The gradient is taken with respect to the interpolated image only; the
    conditioning feature map is treated as a constant.
    """
    interp = interp.detach().requires_grad_(True)
    scores = critic(interp, cond.detach())
    grads, = torch.autograd.grad(scores.sum(), interp, create_graph=True)
    if not torch.isfinite(grads).all():
        raise NonFiniteLoss("critic gradient on interpolates is not finite")
    norms = grads.flatten(1).norm(2, dim=1)
    return (norms - 1.0).pow(2).mean()


def drift_penalty(real_scores: torch.Tensor) -> torch.Tensor:
    """Quadratic pull of real-sample critic scores toward zero."""
    return real_scores.pow(2).mean()


def penalty_loss(critic, interp: torch.Tensor, cond: torch.Tensor,
                 real_scores: torch.Tensor, weights: LossWeights) -> torch.Tensor:
    """Combined penalty: lambda_gp * GP + eps_drift * drift."""
    return (weights.lambda_gp * gradient_penalty(critic, interp, cond)
            + weights.eps_drift * drift_penalty(real_scores))


def generator_total(content, adv_g, weights: LossWeights):
    return content + weights.lambda_adv * adv_g


def discriminator_total(critic, grad_pen, drift):
    return critic + grad_pen + drift


def combine_losses(content, adv_g, critic, grad_pen, drift, weights: LossWeights) -> LossReport:
    """Assemble a report with both totals; rejects non-finite parts."""
    parts = {"content": content, "adv_g": adv_g, "critic": critic,
             "grad_penalty": grad_pen, "drift": drift}
    values = {}
    for name, value in parts.items():
        value = float(value)
        if not torch.isfinite(torch.tensor(value)):
            raise NonFiniteLoss(f"loss part {name} is {value}")
        values[name] = value
    return LossReport(
        total_g=values["content"] + weights.lambda_adv * values["adv_g"],
        total_d=values["critic"] + values["grad_penalty"] + values["drift"],
        **values,
    )


__all__ = [
    "NonFiniteLoss",
    "LossWeights",
    "LossReport",
    "content_loss",
    "adversarial_loss_g",
    "critic_loss",
    "interpolate",
    "gradient_penalty",
    "drift_penalty",
    "penalty_loss",
    "generator_total",
    "discriminator_total",
    "combine_losses",
]
