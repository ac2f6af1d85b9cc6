"""Band-limitation used to simulate low-resolution input.

Low-pass filters are designed as second-order sections and applied
forward-backward so the degraded signal stays sample-aligned with the
original.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio import SAMPLE_RATE, Waveform
from .exceptions import ConfigError

FAMILIES = ("butterworth", "chebyshev1")


@dataclass(frozen=True)
class LowpassSpec:
    cutoff_hz: float
    order: int = 8
    family: str = "butterworth"
    ripple_db: float = 0.05

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown filter family {self.family!r}; choose from {FAMILIES}")
        if self.order < 2 or self.order % 2:
            raise ConfigError(f"filter order must be even and >= 2, got {self.order}")
        if self.cutoff_hz <= 0:
            raise ConfigError("cutoff_hz must be positive")
        if self.family == "chebyshev1" and self.ripple_db <= 0:
            raise ConfigError("ripple_db must be positive")

    def as_dict(self):
        return {
            "cutoff_hz": float(self.cutoff_hz),
            "order": int(self.order),
            "family": self.family,
            "ripple_db": float(self.ripple_db),
        }


@dataclass(frozen=True)
class DegradationPolicy:
    """How cutoffs and filter shapes are drawn for each training example.

    With ``randomize=False`` every draw uses the midpoint cutoff and the first
    family/order choice.
    """

    cutoff_range_hz: tuple = (2000.0, 4000.0)
    family_choices: tuple = FAMILIES
    order_choices: tuple = (6, 8)
    randomize: bool = True
    allow_any_cutoff: bool = False

    def __post_init__(self):
        low, high = (float(v) for v in self.cutoff_range_hz)
        if not low < high:
            raise ConfigError(f"cutoff range must satisfy low < high, got {self.cutoff_range_hz}")
        if not self.allow_any_cutoff and (low < 2000.0 or high > 4000.0):
            raise ConfigError(
                f"cutoff range {self.cutoff_range_hz} leaves [2000, 4000] Hz; "
                "set allow_any_cutoff to override"
            )
        if not self.family_choices or not self.order_choices:
            raise ConfigError("family_choices and order_choices must be non-empty")
        for fam in self.family_choices:
            if fam not in FAMILIES:
                raise ConfigError(f"unknown filter family {fam!r}")
        object.__setattr__(self, "cutoff_range_hz", (low, high))
        object.__setattr__(self, "family_choices", tuple(self.family_choices))
        object.__setattr__(self, "order_choices", tuple(int(o) for o in self.order_choices))

    def draw(self, rng):
        low, high = self.cutoff_range_hz
        if not self.randomize:
            return LowpassSpec(0.5 * (low + high), self.order_choices[0], self.family_choices[0])
        cutoff = float(rng.uniform(low, high))
        family = self.family_choices[int(rng.integers(len(self.family_choices)))]
        order = self.order_choices[int(rng.integers(len(self.order_choices)))]
        return LowpassSpec(cutoff, order, family)


def design_lowpass(spec, sample_rate_hz=SAMPLE_RATE):
    """Second-order-section coefficients (``[n_sections, 6]``) for ``spec``."""
    nyquist = sample_rate_hz / 2
    if spec.cutoff_hz >= nyquist:
        raise ConfigError(f"cutoff {spec.cutoff_hz} Hz must be below Nyquist ({nyquist} Hz)")
    if spec.family == "butterworth":
        return signal.butter(spec.order, spec.cutoff_hz, fs=sample_rate_hz, output="sos")
    return signal.cheby1(spec.order, spec.ripple_db, spec.cutoff_hz, fs=sample_rate_hz, output="sos")


def frequency_response(sos, freqs_hz, sample_rate_hz=SAMPLE_RATE):
    _, h = signal.sosfreqz(sos, worN=np.asarray(freqs_hz, dtype=np.float64), fs=sample_rate_hz)
    return h


def _check_sos(sos):
    sos = np.asarray(sos, dtype=np.float64)
    if sos.ndim != 2 or sos.shape[1] != 6 or sos.shape[0] == 0:
        raise ConfigError(f"expected second-order sections of shape [n, 6], got {sos.shape}")
    if not np.all(np.isfinite(sos)):
        raise ConfigError("filter coefficients must be finite")
    return sos


def filtfilt(samples, sos):
    """Zero-phase filtering along the last axis of an array."""
    sos = _check_sos(sos)
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.shape[-1]
    # default padlen is 3 * (2 * n_sections + 1); shorter inputs get what fits
    padlen = min(3 * (2 * sos.shape[0] + 1), n - 1)
    return np.ascontiguousarray(signal.sosfiltfilt(sos, samples, axis=-1, padlen=max(padlen, 0)))


def apply_filter(wave, sos):
    """Forward-backward filter ``wave``; output has the same length and rate."""
    return Waveform(filtfilt(wave.samples, sos), wave.sample_rate_hz)


def simulate_low_resolution(wave, policy, rng):
    """Band-limit ``wave`` with a filter drawn from ``policy``.

    Returns ``(degraded_wave, spec)``.
    """
    spec = policy.draw(rng)
    sos = design_lowpass(spec, wave.sample_rate_hz)
    return apply_filter(wave, sos), spec


def degrade_fixed(samples, cutoff_hz, sample_rate_hz=SAMPLE_RATE, order=8, family="butterworth"):
    """Deterministic band-limiting of a raw array (used for evaluation)."""
    sos = design_lowpass(LowpassSpec(cutoff_hz, order, family), sample_rate_hz)
    return filtfilt(samples, sos)
