"""Wave-to-wave U-net generator with a bidirectional LSTM bottleneck.

Encoder blocks are strided convolutions followed by a gated 1x1 convolution,
decoder blocks mirror them with transposed convolutions, and encoder
activations are added back at matching decoder stages. Input is optionally
upsampled 2x with a windowed-sinc interpolator before the encoder and
downsampled after the decoder.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .audio import Waveform
from .exceptions import ConfigError, ShapeError


NORMALIZE_FLOOR = 1e-3


@dataclass(frozen=True)
class GeneratorConfig:
    depth: int = 3
    initial_channels: int = 32
    channel_growth: float = 2.0
    kernel_size: int = 8
    stride: int = 4
    lstm_layers: int = 2
    glu_gating: bool = True
    resample_factor: int = 2
    rescale: float = 0.1
    normalize: bool = True
    zero_init_output: bool = False

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if self.stride < 1 or self.kernel_size < self.stride:
            raise ConfigError("need stride >= 1 and kernel_size >= stride")
        if self.initial_channels < 1 or self.channel_growth <= 0:
            raise ConfigError("initial_channels and channel_growth must be positive")
        if self.resample_factor not in (1, 2):
            raise ConfigError("resample_factor must be 1 or 2")
        if self.lstm_layers < 0:
            raise ConfigError("lstm_layers must be >= 0")

    def channels(self):
        return [int(round(self.initial_channels * self.channel_growth**i)) for i in range(self.depth)]

    @classmethod
    def desk(cls, **overrides):
        return cls(**overrides)

    @classmethod
    def paper(cls, **overrides):
        # 48 initial channels lands the count at ~136M (see count_parameters tests)
        params = dict(depth=6, initial_channels=48, channel_growth=2.0, lstm_layers=2)
        params.update(overrides)
        return cls(**params)

    def to_dict(self):
        return asdict(self)


def _sinc(t):
    return torch.where(t == 0, torch.ones_like(t), torch.sin(t) / t)


def _half_sample_kernel(zeros, dtype):
    win = torch.hann_window(4 * zeros + 1, periodic=False, dtype=torch.float64)
    t = torch.linspace(-zeros + 0.5, zeros - 0.5, 2 * zeros, dtype=torch.float64) * math.pi
    return (_sinc(t) * win[1::2]).to(dtype).view(1, 1, -1)


def upsample2(x, zeros=56):
    """Interleave ``x`` with its sinc-interpolated half-sample shift: ``[..., T] -> [..., 2T]``."""
    *other, time = x.shape
    kernel = _half_sample_kernel(zeros, x.dtype).to(x.device)
    odd = F.conv1d(x.reshape(-1, 1, time), kernel, padding=zeros)[..., 1:].reshape(*other, time)
    return torch.stack([x, odd], dim=-1).reshape(*other, 2 * time)


def downsample2(x, zeros=56):
    """Inverse of :func:`upsample2`: ``[..., 2T] -> [..., T]``."""
    if x.shape[-1] % 2:
        x = F.pad(x, (0, 1))
    even, odd = x[..., ::2], x[..., 1::2]
    *other, time = odd.shape
    kernel = _half_sample_kernel(zeros, x.dtype).to(x.device)
    shifted = F.conv1d(odd.reshape(-1, 1, time), kernel, padding=zeros)[..., :-1].reshape(*other, time)
    return 0.5 * (even + shifted)


def _is_valid(m, config):
    length = m * config.resample_factor
    for _ in range(config.depth):
        if length < config.kernel_size or (length - config.kernel_size) % config.stride:
            return False
        length = (length - config.kernel_size) // config.stride + 1
    return True


def valid_length(n, config):
    """Smallest ``m >= n`` that passes the encoder/decoder stack without trimming."""
    if n < 1:
        raise ConfigError("length must be >= 1")
    m = n
    while not _is_valid(m, config):
        m += 1
    return m


class BLSTM(nn.Module):
    def __init__(self, dim, layers):
        super().__init__()
        self.lstm = nn.LSTM(input_size=dim, hidden_size=dim, num_layers=layers, bidirectional=True)
        self.linear = nn.Linear(2 * dim, dim)

    def forward(self, x):
        x = x.permute(2, 0, 1)  # [time, batch, channels]
        x = self.linear(self.lstm(x)[0])
        return x.permute(1, 2, 0)


def _rescale(module, reference):
    for sub in module.modules():
        if isinstance(sub, (nn.Conv1d, nn.ConvTranspose1d)) and sub.weight.numel() > 1:
            std = sub.weight.std().detach()
            scale = (std / reference) ** 0.5
            sub.weight.data /= scale
            if sub.bias is not None:
                sub.bias.data /= scale


class Generator(nn.Module):
    def __init__(self, config=None):
        super().__init__()
        self.config = config = config or GeneratorConfig()
        K, S = config.kernel_size, config.stride
        gate = 2 if config.glu_gating else 1
        activation = nn.GLU(dim=1) if config.glu_gating else nn.ReLU()

        self.encoder = nn.ModuleList()
        self.decoder = nn.ModuleList()
        chin = 1
        for index, hidden in enumerate(config.channels()):
            self.encoder.append(
                nn.Sequential(
                    nn.Conv1d(chin, hidden, K, S),
                    nn.ReLU(),
                    nn.Conv1d(hidden, gate * hidden, 1),
                    activation,
                )
            )
            decode = [
                nn.Conv1d(hidden, gate * hidden, 1),
                activation,
                nn.ConvTranspose1d(hidden, chin, K, S),
            ]
            if index > 0:
                decode.append(nn.ReLU())
            self.decoder.insert(0, nn.Sequential(*decode))
            chin = hidden

        self.lstm = BLSTM(chin, config.lstm_layers) if config.lstm_layers else None
        if config.rescale:
            _rescale(self, config.rescale)
        if config.zero_init_output:
            nn.init.zeros_(self.decoder[-1][2].weight)

    def valid_length(self, n):
        return valid_length(n, self.config)

    def forward(self, x):
        """Map ``[batch, time]`` or ``[batch, 1, time]`` to the same shape."""
        squeeze = x.dim() == 2
        if squeeze:
            x = x.unsqueeze(1)
        if x.dim() != 3 or x.shape[1] != 1:
            raise ShapeError(f"expected [batch, time] or [batch, 1, time], got {tuple(x.shape)}")
        length = x.shape[-1]
        if self.config.normalize:
            std = x.std(dim=-1, keepdim=True) if length > 1 else torch.zeros_like(x)
            x = x / (NORMALIZE_FLOOR + std)
        x = F.pad(x, (0, self.valid_length(length) - length))
        if self.config.resample_factor == 2:
            x = upsample2(x)

        skips = []
        for encode in self.encoder:
            x = encode(x)
            skips.append(x)
        if self.lstm is not None:
            x = self.lstm(x)
        for decode in self.decoder:
            skip = skips.pop(-1)
            x = decode(x + skip[..., : x.shape[-1]])

        if self.config.resample_factor == 2:
            x = downsample2(x)
        x = x[..., :length]
        if self.config.normalize:
            x = x * std
        return x.squeeze(1) if squeeze else x


def init_generator(config=None, seed=0, dtype=torch.float32):
    """Build a generator whose parameters depend only on ``(config, seed)``."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = Generator(config)
    return model.to(dtype)


def count_parameters(model):
    return sum(p.numel() for p in model.parameters())


def count_parameters_for(config):
    """Parameter count of a config without allocating its weights."""
    with torch.device("meta"):
        model = Generator(replace(config, rescale=0.0))
    return count_parameters(model)


def _batch_to_tensor(batch, dtype):
    if isinstance(batch, torch.Tensor):
        return batch, None
    waves = list(batch)
    lengths = {len(w) for w in waves}
    if len(lengths) != 1:
        raise ShapeError(f"all segments in a batch must share one length, got {sorted(lengths)}")
    rate = waves[0].sample_rate_hz if isinstance(waves[0], Waveform) else None
    arr = np.stack([w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64) for w in waves])
    return torch.from_numpy(arr).to(dtype), rate


def generator_forward(model, wave_batch):
    """Run the generator on a tensor batch or a list of equal-length Waveforms.

    Lists come back as lists of :class:`Waveform`; tensors as tensors.
    """
    dtype = next(model.parameters()).dtype
    x, rate = _batch_to_tensor(wave_batch, dtype)
    y = model(x)
    if rate is None and not isinstance(wave_batch, torch.Tensor):
        return [row for row in y.detach().numpy()]
    if rate is not None:
        return [Waveform(row, rate) for row in y.detach().double().numpy()]
    return y


def super_resolve(model, samples, chunk_samples=None):
    """Apply ``model`` to one 1-D array, optionally in non-overlapping chunks."""
    samples = np.asarray(samples, dtype=np.float64)
    dtype = next(model.parameters()).dtype
    chunk = chunk_samples or samples.shape[0]
    out = []
    with torch.no_grad():
        for start in range(0, samples.shape[0], chunk):
            piece = torch.from_numpy(samples[start : start + chunk]).to(dtype).unsqueeze(0)
            out.append(model(piece)[0].double().numpy())
    return np.concatenate(out)
