"""Least-squares adversarial, feature-matching and mel-regression objectives.

Expectations are realized as means: score maps are averaged over every
position (batch included), feature-matching terms are per-layer mean absolute
errors, and the mel term is the mean absolute difference over all log-mel
entries.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List

import torch

from .exceptions import ConfigError, ShapeError
from .spectral import MelConfig, log_mel_tensor


@dataclass(frozen=True)
class LossWeights:
    lambda_fm: float = 2.0
    lambda_mel: float = 45.0

    def __post_init__(self):
        if self.lambda_fm < 0 or self.lambda_mel < 0:
            raise ConfigError("loss weights must be non-negative")


@dataclass
class LossBreakdown:
    adv_g_per_k: List[float] = field(default_factory=list)
    fm_per_k: List[float] = field(default_factory=list)
    mel: float = 0.0
    total_g: float = 0.0
    adv_d_per_k: List[float] = field(default_factory=list)
    total_d: float = 0.0

    def is_finite(self):
        values = [self.mel, self.total_g, self.total_d, *self.adv_g_per_k, *self.fm_per_k, *self.adv_d_per_k]
        return all(math.isfinite(v) for v in values)

    def to_record(self, **extra):
        record = dict(extra)
        record.update(asdict(self))
        return record


def _tensor(x):
    return x if isinstance(x, torch.Tensor) else torch.as_tensor(x, dtype=torch.float64)


def adv_loss_generator(fake_score_map):
    fake = _tensor(fake_score_map)
    if fake.numel() == 0:
        raise ShapeError("empty score map")
    return torch.mean((fake - 1.0) ** 2)


def adv_loss_discriminator(real_score_map, fake_score_map):
    real, fake = _tensor(real_score_map), _tensor(fake_score_map)
    if real.numel() == 0 or fake.numel() == 0:
        raise ShapeError("empty score map")
    return torch.mean((real - 1.0) ** 2) + torch.mean(fake**2)


def feature_matching_loss(real_features, fake_features):
    """Sum over layers of the mean absolute difference; real features are detached."""
    if len(real_features) != len(fake_features):
        raise ShapeError(f"feature lists differ in length: {len(real_features)} vs {len(fake_features)}")
    if not real_features:
        raise ShapeError("feature lists are empty")
    loss = 0.0
    for real, fake in zip(real_features, fake_features):
        real, fake = _tensor(real), _tensor(fake)
        if real.shape != fake.shape:
            raise ShapeError(f"feature shape mismatch {tuple(real.shape)} vs {tuple(fake.shape)}")
        loss = loss + torch.mean(torch.abs(real.detach() - fake))
    return loss


def mel_loss(x, g, mel_config=None):
    """Mean absolute log-mel difference between ground truth ``x`` and output ``g``."""
    mel_config = mel_config or MelConfig()
    x, g = _tensor(x), _tensor(g)
    if x.shape != g.shape:
        raise ShapeError(f"waveform shapes differ: {tuple(x.shape)} vs {tuple(g.shape)}")
    return torch.mean(torch.abs(log_mel_tensor(x, mel_config) - log_mel_tensor(g, mel_config)))


def combine_generator_losses(adv_per_k, fm_per_k, mel, weights):
    """sum_k (adv_k + lambda_fm * fm_k) + lambda_mel * mel, summed left to right."""
    total = 0.0
    for adv, fm in zip(adv_per_k, fm_per_k, strict=True):
        total = total + (adv + weights.lambda_fm * fm)
    return total + weights.lambda_mel * mel


def combine_discriminator_losses(adv_per_k):
    total = 0.0
    for adv in adv_per_k:
        total = total + adv
    return total


def total_generator_loss(outputs_fake, outputs_real, x, g, weights=None, mel_config=None):
    """Generator objective over all sub-discriminators.

    Returns ``(loss_tensor, breakdown)``. Gradients reach the generator only
    through ``g`` and the fake discriminator outputs.
    """
    weights = weights or LossWeights()
    if len(outputs_fake) != len(outputs_real):
        raise ShapeError("real and fake discriminator outputs differ in count")
    adv = [adv_loss_generator(o.score_map) for o in outputs_fake]
    fm = [feature_matching_loss(r.features, f.features) for r, f in zip(outputs_real, outputs_fake)]
    mel = mel_loss(x, g, mel_config)
    total = combine_generator_losses(adv, fm, mel, weights)

    adv_f = [a.item() for a in adv]
    fm_f = [f.item() for f in fm]
    mel_f = mel.item()
    breakdown = LossBreakdown(
        adv_g_per_k=adv_f,
        fm_per_k=fm_f,
        mel=mel_f,
        total_g=combine_generator_losses(adv_f, fm_f, mel_f, weights),
    )
    return total, breakdown


def total_discriminator_loss(outputs_real, outputs_fake_detached):
    """Discriminator objective; returns ``(loss_tensor, breakdown)``.

    The fake outputs must come from a detached generator output so the loss
    reaches the discriminator parameters through both paths but never the
    generator.
    """
    if len(outputs_fake_detached) != len(outputs_real):
        raise ShapeError("real and fake discriminator outputs differ in count")
    adv = [adv_loss_discriminator(r.score_map, f.score_map) for r, f in zip(outputs_real, outputs_fake_detached)]
    total = combine_discriminator_losses(adv)
    adv_f = [a.item() for a in adv]
    return total, LossBreakdown(adv_d_per_k=adv_f, total_d=combine_discriminator_losses(adv_f))
