"""Waveform container, WAV file I/O, loudness normalization and segment sampling."""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.io import wavfile
from scipy.signal import firwin, resample_poly

from .exceptions import AudioFormatError, AudioIOError, ConfigError, EmptyInputError

SAMPLE_RATE = 16000

# polyphase resampler: 64 taps per phase, Kaiser beta 8.6
_TAPS_PER_PHASE = 64
_KAISER_BETA = 8.6


@dataclass
class Waveform:
    """Mono waveform with its sample rate.

    ``samples`` is stored as a 1-D float64 array; construction rejects empty or
    non-finite input.
    """

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ConfigError(f"Waveform samples must be 1-D, got shape {samples.shape}")
        if samples.size == 0:
            raise EmptyInputError("Waveform must contain at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ConfigError("Waveform samples must be finite")
        if int(self.sample_rate_hz) <= 0:
            raise ConfigError("sample_rate_hz must be positive")
        self.samples = samples
        self.sample_rate_hz = int(self.sample_rate_hz)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self):
        return len(self) / self.sample_rate_hz


@dataclass(frozen=True)
class SegmentSpec:
    duration_s: float = 2.56
    sample_rate_hz: int = SAMPLE_RATE
    length_samples: int = field(init=False)

    def __post_init__(self):
        if self.duration_s <= 0 or self.sample_rate_hz <= 0:
            raise ConfigError("SegmentSpec needs positive duration and sample rate")
        object.__setattr__(self, "length_samples", int(round(self.duration_s * self.sample_rate_hz)))


def resample(samples, orig_sr, target_sr):
    """Rational-ratio polyphase resampling with a Kaiser-windowed sinc filter."""
    samples = np.asarray(samples, dtype=np.float64)
    if orig_sr == target_sr:
        return samples.copy()
    ratio = Fraction(int(target_sr), int(orig_sr))
    up, down = ratio.numerator, ratio.denominator
    max_rate = max(up, down)
    half_len = _TAPS_PER_PHASE // 2 * max_rate
    taps = firwin(2 * half_len + 1, 1.0 / max_rate, window=("kaiser", _KAISER_BETA))
    return resample_poly(samples, up, down, window=taps)


def _to_float(data):
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if np.issubdtype(data.dtype, np.floating):
        return data.astype(np.float64)
    raise AudioFormatError(f"Unsupported sample type {data.dtype}")


def load_wave(path, sample_rate_hz=SAMPLE_RATE):
    """Read a RIFF/WAVE file as a mono :class:`Waveform` at ``sample_rate_hz``.

    Multi-channel files are averaged to mono. Integer PCM is scaled to [-1, 1).
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise AudioIOError(f"No such file: {path}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except ValueError as exc:
        raise AudioFormatError(f"Cannot decode {path}: {exc}") from exc
    except OSError as exc:
        raise AudioIOError(str(exc)) from exc
    samples = _to_float(np.asarray(data))
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise EmptyInputError(f"{path} contains no audio")
    if rate != sample_rate_hz:
        samples = resample(samples, rate, sample_rate_hz)
    return Waveform(samples, sample_rate_hz)


def save_wave(wave, path):
    """Write ``wave`` as 16-bit PCM. Samples outside [-1, 1) are clipped."""
    pcm = np.clip(np.round(wave.samples * 32768.0), -32768, 32767).astype(np.int16)
    try:
        wavfile.write(os.fspath(path), wave.sample_rate_hz, pcm)
    except OSError as exc:
        raise AudioIOError(f"Cannot write {path}: {exc}") from exc


def rms_dbfs(samples):
    rms = np.sqrt(np.mean(np.square(np.asarray(samples, dtype=np.float64))))
    if rms == 0:
        return -np.inf
    return 20.0 * np.log10(rms)


def normalize_loudness(wave, target_rms_dbfs=-20.0, return_info=False):
    """Scale ``wave`` so its RMS level equals ``target_rms_dbfs``.

    If the required gain pushes peaks past full scale the result is clipped and
    ``clipped`` is reported as True (a ``RuntimeWarning`` is also emitted).
    With ``return_info`` the call returns ``(wave, gain, clipped)``.
    """
    level = rms_dbfs(wave.samples)
    if not np.isfinite(level):
        raise EmptyInputError("Cannot normalize a silent waveform")
    gain = 10.0 ** ((target_rms_dbfs - level) / 20.0)
    scaled = wave.samples * gain
    clipped = bool(np.max(np.abs(scaled)) > 1.0)
    if clipped:
        warnings.warn("loudness normalization clipped samples to [-1, 1]", RuntimeWarning, stacklevel=2)
        scaled = np.clip(scaled, -1.0, 1.0)
    out = Waveform(scaled, wave.sample_rate_hz)
    if return_info:
        return out, gain, clipped
    return out


def segment_offsets(n_samples, spec, rng, count):
    if n_samples < spec.length_samples:
        raise EmptyInputError(
            f"Waveform of {n_samples} samples is shorter than segment length {spec.length_samples}"
        )
    return rng.integers(0, n_samples - spec.length_samples + 1, size=count)


def extract_segments(wave, spec, rng, count, return_offsets=False):
    """Draw ``count`` segments with uniformly distributed start offsets."""
    offsets = segment_offsets(len(wave), spec, rng, count)
    n = spec.length_samples
    segments = [Waveform(wave.samples[o : o + n].copy(), wave.sample_rate_hz) for o in offsets]
    if return_offsets:
        return segments, [int(o) for o in offsets]
    return segments
