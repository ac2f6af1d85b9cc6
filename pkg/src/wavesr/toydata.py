"""Synthetic harmonic "piano-like" recordings for smoke runs and tests."""
import numpy as np

from .audio import SAMPLE_RATE, Waveform


def piano_like(duration_s, seed=0, sample_rate_hz=SAMPLE_RATE, notes_per_second=4.0, noise_db=-50.0):
    """Random sequence of decaying harmonic tones with ~1/k partial amplitudes.

    Partials run up to Nyquist so the signal carries energy across the whole
    band, which is what band-limiting removes.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    out = np.zeros(n)
    t_note = np.arange(int(1.5 * sample_rate_hz)) / sample_rate_hz
    n_notes = max(1, int(duration_s * notes_per_second))
    for _ in range(n_notes):
        start = int(rng.integers(0, n))
        midi = rng.integers(36, 90)
        f0 = 440.0 * 2.0 ** ((midi - 69) / 12)
        k = np.arange(1, int((sample_rate_hz / 2 - 1) // f0) + 1)
        amps = rng.uniform(0.5, 1.0, size=k.size) / k
        phases = rng.uniform(0, 2 * np.pi, size=k.size)
        decay = 2.0 + 0.002 * k * f0 / 10.0  # upper partials die faster
        seg = t_note[: n - start]
        tone = np.sum(
            amps[:, None] * np.exp(-decay[:, None] * seg[None, :]) * np.sin(2 * np.pi * k[:, None] * f0 * seg[None, :] + phases[:, None]),
            axis=0,
        )
        out[start : start + seg.size] += rng.uniform(0.3, 1.0) * tone
    out += 10 ** (noise_db / 20) * rng.standard_normal(n)
    out *= 0.5 / max(np.max(np.abs(out)), 1e-12)
    return Waveform(out, sample_rate_hz)
