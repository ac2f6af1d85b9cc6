"""STFT, mel filterbank and log-mel spectrogram.

All transforms are written in torch so they can sit inside the training graph
(mel loss, resolution discriminators). Waveform/numpy inputs are accepted and
numpy comes back out.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import torch

from .audio import SAMPLE_RATE, Waveform
from .exceptions import ConfigError


@dataclass(frozen=True)
class SpectrogramConfig:
    n_fft: int = 1024
    hop_length: int = 256
    win_length: int = 1024

    def __post_init__(self):
        n_fft = int(self.n_fft)
        if n_fft <= 0 or n_fft & (n_fft - 1):
            raise ConfigError(f"n_fft must be a power of two, got {self.n_fft}")
        if not 0 < self.hop_length <= self.win_length <= n_fft:
            raise ConfigError(
                "need 0 < hop_length <= win_length <= n_fft, got "
                f"hop={self.hop_length} win={self.win_length} n_fft={self.n_fft}"
            )

    @property
    def n_bins(self):
        return self.n_fft // 2 + 1

    def n_frames(self, n_samples):
        return n_samples // self.hop_length + 1


@dataclass(frozen=True)
class MelConfig:
    spect: SpectrogramConfig = field(default_factory=SpectrogramConfig)
    n_mels: int = 100
    f_min_hz: float = 0.0
    f_max_hz: float = 8000.0
    log_floor: float = 1e-5
    sample_rate_hz: int = SAMPLE_RATE

    def __post_init__(self):
        if self.n_mels < 1:
            raise ConfigError("n_mels must be >= 1")
        if not 0 <= self.f_min_hz < self.f_max_hz <= self.sample_rate_hz / 2:
            raise ConfigError(
                f"need 0 <= f_min < f_max <= Nyquist, got {self.f_min_hz}, {self.f_max_hz}"
            )
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")


@dataclass
class Spectrogram:
    values: np.ndarray  # [frequency_bins, frames]
    config: SpectrogramConfig
    kind: str = "complex"


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def reflect_indices(n, pad):
    """Indices of a length ``n`` signal reflect-padded by ``pad`` on each side.

    Unlike ``F.pad(mode="reflect")`` this works for any ``pad``, reflecting
    repeatedly when the signal is shorter than the pad.
    """
    idx = np.arange(-pad, n + pad)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


@lru_cache(maxsize=None)
def _window(n_fft, win_length):
    win = torch.hann_window(win_length, periodic=True, dtype=torch.float64)
    left = (n_fft - win_length) // 2
    return torch.nn.functional.pad(win, (left, n_fft - win_length - left))


def stft_tensor(x, config):
    """Complex STFT of ``x`` (shape ``[..., time]``) -> ``[..., n_fft//2+1, frames]``."""
    n = x.shape[-1]
    if n < 1:
        raise ConfigError("STFT input must contain at least one sample")
    pad = config.n_fft // 2
    idx = torch.from_numpy(reflect_indices(n, pad)).to(x.device)
    padded = x.index_select(-1, idx)
    frames = padded.unfold(-1, config.n_fft, config.hop_length)  # [..., frames, n_fft]
    window = _window(config.n_fft, config.win_length).to(device=x.device, dtype=x.dtype)
    spec = torch.fft.rfft(frames * window, dim=-1)
    return spec.transpose(-1, -2)


def magnitude(spec):
    return spec.abs()


def _as_tensor(wave):
    if isinstance(wave, Waveform):
        return torch.from_numpy(wave.samples), True
    if isinstance(wave, np.ndarray):
        return torch.from_numpy(np.ascontiguousarray(wave, dtype=np.float64)), True
    return wave, False


def stft(wave, config):
    """STFT of a Waveform (or array). Returns a complex :class:`Spectrogram`."""
    x, _ = _as_tensor(wave)
    return Spectrogram(stft_tensor(x, config).numpy(), config, "complex")


def build_mel_filterbank(config):
    """Triangular HTK-mel filterbank, shape ``[n_mels, n_fft//2 + 1]``.

    Filters have unit peak height (no area normalization).
    """
    n_fft = config.spect.n_fft
    freqs = np.arange(n_fft // 2 + 1) * config.sample_rate_hz / n_fft
    mel_points = np.linspace(hz_to_mel(config.f_min_hz), hz_to_mel(config.f_max_hz), config.n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    hz_points[0], hz_points[-1] = config.f_min_hz, config.f_max_hz
    lower, center, upper = hz_points[:-2, None], hz_points[1:-1, None], hz_points[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(fb.sum(axis=1) <= 0)
    if empty.size:
        raise ConfigError(
            f"{empty.size} mel filters cover no FFT bin; reduce n_mels or raise n_fft"
        )
    return fb


@lru_cache(maxsize=16)
def _filterbank_tensor(config):
    return torch.from_numpy(build_mel_filterbank(config))


def log_mel_tensor(x, config):
    """Natural-log mel spectrogram of ``x`` (``[..., time]``) -> ``[..., n_mels, frames]``."""
    mag = magnitude(stft_tensor(x, config.spect))
    fb = _filterbank_tensor(config).to(device=x.device, dtype=mag.dtype)
    return torch.log(torch.clamp(fb @ mag, min=config.log_floor))


def mel_spectrogram(wave, config=None):
    """log(max(filterbank @ |STFT|, floor)). Tensors in, tensors out; arrays in, arrays out."""
    config = config or MelConfig()
    x, to_numpy = _as_tensor(wave)
    out = log_mel_tensor(x, config)
    return out.numpy() if to_numpy else out


_SPEC_MAGIC = b"WSRSPEC1"


def dump_spectrogram(values, path):
    """Write an array as float32 row-major with a dims header.

    Complex arrays get a trailing axis of length 2 (real, imag).
    """
    arr = np.asarray(values)
    if np.iscomplexobj(arr):
        arr = np.stack([arr.real, arr.imag], axis=-1)
    arr = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_SPEC_MAGIC)
        fh.write(struct.pack("<I", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def read_spectrogram(path):
    with open(path, "rb") as fh:
        if fh.read(len(_SPEC_MAGIC)) != _SPEC_MAGIC:
            raise ConfigError(f"{path} is not a spectrogram dump")
        (ndim,) = struct.unpack("<I", fh.read(4))
        shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
        return np.frombuffer(fh.read(), dtype="<f4").reshape(shape).copy()
