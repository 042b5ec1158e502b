"""Masked reconstruction and adversarial loss terms."""

from __future__ import annotations

import torch

_EPS = 1e-7


def masked_l1(pred: torch.Tensor, target: torch.Tensor,
              valid: torch.Tensor | None = None) -> torch.Tensor:
    """Mean absolute difference over valid cells.

    `valid` is a boolean tensor broadcastable to `target`; cells where it
    is False contribute nothing to the mean. With no mask, all cells count.
    """
    diff = (pred - target).abs()
    if valid is None:
        return diff.mean()
    valid = valid.to(diff.dtype)
    denom = valid.sum().clamp_min(1.0)
    return (diff * valid).sum() / denom


def adversarial_losses(disc_real: torch.Tensor,
                       disc_fake: torch.Tensor):
    """Binary cross-entropy terms from patch score maps in [0, 1].

    Returns (loss_d, loss_g_adv): the discriminator minimizes BCE against
    labels real=1 / fake=0; the generator term is the non-saturating BCE of
    fake patches against 1.
    """
    real = disc_real.clamp(_EPS, 1.0 - _EPS)
    fake = disc_fake.clamp(_EPS, 1.0 - _EPS)
    loss_d = -(real.log().mean() + (1.0 - fake).log().mean())
    loss_g_adv = -fake.log().mean()
    return loss_d, loss_g_adv


def generator_objective(l1: torch.Tensor, loss_g_adv, lambda_g: float,
                        lambda_d: float) -> torch.Tensor:
    """Total generator loss lambda_g * L1 + lambda_d * adversarial.

    When lambda_d is exactly 0 the adversarial term is not touched at all,
    so the optimization step is bitwise identical to a pure-L1 update.
    """
    if lambda_d == 0.0:
        return lambda_g * l1
    return lambda_g * l1 + lambda_d * loss_g_adv
