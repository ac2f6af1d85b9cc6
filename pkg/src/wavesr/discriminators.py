"""Multi-scale (waveform) and multi-resolution (spectrogram) discriminators.

Every sub-discriminator returns a :class:`DiscriminatorOutput` holding its
score map and the activations of each of its layers, the last entry being the
score map itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import torch
from torch import nn
from torch.nn import functional as F
from torch.nn.utils.parametrizations import weight_norm

from .exceptions import ConfigError, ShapeError
from .spectral import SpectrogramConfig, stft_tensor

LRELU_SLOPE = 0.1

# (out_channels, kernel, stride, groups)
MSD_LAYERS_FULL = (
    (16, 15, 1, 1),
    (64, 41, 4, 4),
    (256, 41, 4, 16),
    (1024, 41, 4, 64),
    (1024, 41, 4, 256),
    (1024, 5, 1, 1),
)
MSD_LAYERS_DESK = (
    (16, 15, 1, 1),
    (32, 41, 4, 4),
    (64, 41, 4, 16),
    (64, 41, 4, 16),
    (64, 5, 1, 1),
)

# (out_channels, (kernel_t, kernel_f), (stride_t, stride_f))
def _mrd_layers(channels):
    return (
        (channels, (3, 9), (1, 1)),
        (channels, (3, 9), (1, 2)),
        (channels, (3, 9), (1, 2)),
        (channels, (3, 9), (1, 2)),
        (channels, (3, 3), (1, 1)),
    )


MRD_LAYERS_FULL = _mrd_layers(32)
MRD_LAYERS_DESK = _mrd_layers(16)

MRD_RESOLUTIONS = (
    SpectrogramConfig(1024, 120, 600),
    SpectrogramConfig(2048, 240, 1200),
    SpectrogramConfig(512, 50, 240),
)


@dataclass(frozen=True)
class MsdConfig:
    downsample_ratios: tuple = (1, 2, 4)
    layers: tuple = MSD_LAYERS_DESK
    pool_kernel: int = 4
    pool_stride: int = 2

    def __post_init__(self):
        ratios = tuple(int(r) for r in self.downsample_ratios)
        if not ratios or ratios[0] != 1 or any(b <= a for a, b in zip(ratios, ratios[1:])):
            raise ConfigError(f"downsample ratios must start at 1 and increase, got {ratios}")
        if any(r & (r - 1) for r in ratios):
            raise ConfigError("downsample ratios must be powers of two (repeated 2x pooling)")
        for out_ch, _, _, groups in self.layers:
            if out_ch % groups:
                raise ConfigError(f"groups {groups} must divide channels {out_ch}")
        object.__setattr__(self, "downsample_ratios", ratios)
        object.__setattr__(self, "layers", tuple(tuple(layer) for layer in self.layers))

    @classmethod
    def full(cls, **kw):
        return cls(layers=MSD_LAYERS_FULL, **kw)


@dataclass(frozen=True)
class MrdConfig:
    resolutions: tuple = MRD_RESOLUTIONS
    layers: tuple = MRD_LAYERS_DESK

    def __post_init__(self):
        if not self.resolutions:
            raise ConfigError("MRD needs at least one resolution")
        res = tuple(r if isinstance(r, SpectrogramConfig) else SpectrogramConfig(*r) for r in self.resolutions)
        object.__setattr__(self, "resolutions", res)
        object.__setattr__(
            self, "layers", tuple((int(c), tuple(k), tuple(s)) for c, k, s in self.layers)
        )

    @classmethod
    def full(cls, **kw):
        return cls(layers=MRD_LAYERS_FULL, **kw)


@dataclass
class DiscriminatorOutput:
    score_map: torch.Tensor
    features: List[torch.Tensor] = field(default_factory=list)

    @property
    def n_layers(self):
        return len(self.features)


class ScaleDiscriminator(nn.Module):
    """1-D conv stack on a (possibly pooled) waveform."""

    def __init__(self, layers):
        super().__init__()
        convs = []
        chin = 1
        for out_ch, kernel, stride, groups in layers:
            convs.append(weight_norm(nn.Conv1d(chin, out_ch, kernel, stride, padding=(kernel - 1) // 2, groups=groups)))
            chin = out_ch
        self.convs = nn.ModuleList(convs)
        self.post = weight_norm(nn.Conv1d(chin, 1, 3, 1, padding=1))
        self.receptive_field = self._receptive_field(layers)

    @staticmethod
    def _receptive_field(layers):
        field_, jump = 1, 1
        for _, kernel, stride, _ in list(layers) + [(1, 3, 1, 1)]:
            field_ += (kernel - 1) * jump
            jump *= stride
        return field_

    def forward(self, x):
        features = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
            features.append(x)
        x = self.post(x)
        features.append(x)
        return DiscriminatorOutput(x, features)


class MultiScaleDiscriminator(nn.Module):
    def __init__(self, config=None):
        super().__init__()
        self.config = config = config or MsdConfig()
        self.discriminators = nn.ModuleList(ScaleDiscriminator(config.layers) for _ in config.downsample_ratios)
        self.pool = nn.AvgPool1d(config.pool_kernel, config.pool_stride, padding=config.pool_kernel // 2)

    @property
    def min_length(self):
        return self.discriminators[0].receptive_field

    def forward(self, x):
        x = _as_batch(x)
        if x.shape[-1] < self.min_length:
            raise ShapeError(
                f"input of {x.shape[-1]} samples is shorter than the receptive field ({self.min_length})"
            )
        outputs = []
        level = 1
        for ratio, disc in zip(self.config.downsample_ratios, self.discriminators):
            while level < ratio:
                x = self.pool(x)
                level *= 2
            outputs.append(disc(x))
        return outputs


class ResolutionDiscriminator(nn.Module):
    """2-D conv stack on a magnitude spectrogram laid out as ``[batch, 1, frames, bins]``."""

    def __init__(self, resolution, layers):
        super().__init__()
        self.resolution = resolution
        convs = []
        chin = 1
        for out_ch, kernel, stride in layers:
            padding = tuple((k - 1) // 2 for k in kernel)
            convs.append(weight_norm(nn.Conv2d(chin, out_ch, kernel, stride, padding=padding)))
            chin = out_ch
        self.convs = nn.ModuleList(convs)
        self.post = weight_norm(nn.Conv2d(chin, 1, (3, 3), padding=(1, 1)))

    def spectrogram(self, x):
        return stft_tensor(x.squeeze(1), self.resolution).abs().transpose(-1, -2).unsqueeze(1)

    def forward(self, x):
        x = self.spectrogram(x)
        features = []
        for conv in self.convs:
            x = F.leaky_relu(conv(x), LRELU_SLOPE)
            features.append(x)
        x = self.post(x)
        features.append(x)
        return DiscriminatorOutput(x, features)


class MultiResolutionDiscriminator(nn.Module):
    def __init__(self, config=None):
        super().__init__()
        self.config = config = config or MrdConfig()
        self.discriminators = nn.ModuleList(ResolutionDiscriminator(r, config.layers) for r in config.resolutions)

    @property
    def min_length(self):
        return max(r.n_fft for r in self.config.resolutions) // 2

    def forward(self, x):
        x = _as_batch(x)
        if x.shape[-1] < self.min_length:
            raise ShapeError(f"input of {x.shape[-1]} samples is shorter than {self.min_length}")
        return [disc(x) for disc in self.discriminators]


class DiscriminatorSuite(nn.Module):
    """MSD sub-discriminators (ascending ratio) followed by MRD ones (config order)."""

    def __init__(self, msd_config=None, mrd_config=None):
        super().__init__()
        self.msd = MultiScaleDiscriminator(msd_config)
        self.mrd = MultiResolutionDiscriminator(mrd_config)

    def forward(self, x):
        return self.msd(x) + self.mrd(x)

    def __len__(self):
        return len(self.msd.discriminators) + len(self.mrd.discriminators)


def _as_batch(x):
    if x.dim() == 1:
        x = x.view(1, 1, -1)
    elif x.dim() == 2:
        x = x.unsqueeze(1)
    if x.dim() != 3 or x.shape[1] != 1:
        raise ShapeError(f"expected [batch, time] or [batch, 1, time], got {tuple(x.shape)}")
    return x


def init_discriminators(msd_config=None, mrd_config=None, seed=0, dtype=torch.float32):
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        suite = DiscriminatorSuite(msd_config, mrd_config)
    return suite.to(dtype)


def msd_forward(suite, wave_batch):
    return suite.msd(wave_batch)


def mrd_forward(suite, wave_batch):
    return suite.mrd(wave_batch)


def suite_forward(suite, wave_batch):
    return suite(wave_batch)
