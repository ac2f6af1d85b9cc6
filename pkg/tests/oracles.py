"""Straight-line reference implementations used as test oracles."""
import math

import numpy as np
import torch

from wavesr.discriminators import DiscriminatorOutput


def oracle_adv_g(fake):
    fake = np.ravel(fake)
    return sum((v - 1.0) ** 2 for v in fake) / fake.size


def oracle_adv_d(real, fake):
    real, fake = np.ravel(real), np.ravel(fake)
    return sum((v - 1.0) ** 2 for v in real) / real.size + sum(v**2 for v in fake) / fake.size


def oracle_fm(real_feats, fake_feats):
    total = 0.0
    for r, f in zip(real_feats, fake_feats):
        r, f = np.ravel(r), np.ravel(f)
        total += sum(abs(a - b) for a, b in zip(r, f)) / r.size
    return total


def oracle_log_mel(x, n_fft=1024, hop=256, n_mels=100, sr=16000, fmax=8000.0, floor=1e-5):
    padded = np.pad(x, n_fft // 2, mode="reflect")
    n = np.arange(n_fft)
    window = 0.5 - 0.5 * np.cos(2 * np.pi * n / n_fft)
    n_frames = len(x) // hop + 1
    frames = np.stack([padded[t * hop : t * hop + n_fft] * window for t in range(n_frames)], axis=1)
    mag = np.abs(np.fft.rfft(frames, axis=0))
    mel = lambda f: 2595.0 * math.log10(1.0 + f / 700.0)  # noqa: E731
    imel = lambda m: 700.0 * (10 ** (m / 2595.0) - 1.0)  # noqa: E731
    top = mel(fmax)
    edges = [imel(top * i / (n_mels + 1)) for i in range(n_mels + 2)]
    edges[0], edges[-1] = 0.0, fmax
    fb = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(n_mels):
        lo, c, hi = edges[m], edges[m + 1], edges[m + 2]
        for k in range(n_fft // 2 + 1):
            f = k * sr / n_fft
            if lo < f <= c:
                fb[m, k] = (f - lo) / (c - lo)
            elif c < f < hi:
                fb[m, k] = (hi - f) / (hi - c)
    return np.log(np.maximum(fb @ mag, floor))


def oracle_mel_loss(x, g):
    return float(np.mean(np.abs(oracle_log_mel(x) - oracle_log_mel(g))))


def oracle_lsd(ref, est, n_fft=2048, hop=512, floor=1e-8):
    window = np.hanning(n_fft + 1)[:-1]
    def power(x):
        padded = np.pad(x, n_fft // 2, mode="reflect")
        cols = []
        for t in range(len(x) // hop + 1):
            cols.append(np.abs(np.fft.rfft(padded[t * hop : t * hop + n_fft] * window)) ** 2)
        return np.maximum(np.array(cols), floor)
    a, b = power(ref), power(est)
    per_frame = [np.sqrt(np.mean((np.log10(ra) - np.log10(rb)) ** 2)) for ra, rb in zip(a, b)]
    return float(np.mean(per_frame))


def fake_outputs(rng, shapes, requires_grad=False):
    outs = []
    for shape_list in shapes:
        feats = [torch.tensor(rng.normal(size=s), requires_grad=requires_grad) for s in shape_list]
        outs.append(DiscriminatorOutput(feats[-1], feats))
    return outs


SUITE_SHAPES = [[(2, 4, 9), (2, 1, 5)]] * 3 + [[(2, 3, 4, 6), (2, 1, 4, 3)]] * 3
