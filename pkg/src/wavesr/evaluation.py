"""Log-spectral distance and the fixed-bandwidth evaluation sweep."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import torch

from .audio import SAMPLE_RATE, Waveform
from .degrade import degrade_fixed
from .exceptions import EmptyInputError, ShapeError
from .generator import Generator, super_resolve
from .spectral import SpectrogramConfig, stft_tensor

DEFAULT_BANDWIDTHS = (2500, 3000, 3500, 4000)


@dataclass(frozen=True)
class LsdConfig:
    n_fft: int = 2048
    hop: int = 512
    win: int = 2048
    power_floor: float = 1e-8
    chunk_seconds: float = 30.0

    @property
    def spect(self):
        return SpectrogramConfig(self.n_fft, self.hop, self.win)


def _samples(w):
    if isinstance(w, Waveform):
        return w.samples, w.sample_rate_hz
    return np.asarray(w, dtype=np.float64), None


def _frame_lsd(reference, estimate, config):
    spect = config.spect
    ref = torch.from_numpy(reference)
    est = torch.from_numpy(estimate)
    p_ref = torch.clamp(stft_tensor(ref, spect).abs() ** 2, min=config.power_floor)
    p_est = torch.clamp(stft_tensor(est, spect).abs() ** 2, min=config.power_floor)
    diff = torch.log10(p_ref) - torch.log10(p_est)
    return torch.sqrt(torch.mean(diff**2, dim=0)).numpy()


def lsd(reference, estimate, config=None):
    """Log-spectral distance: frame-mean of the per-frame RMS log10-power difference.

    Signals longer than ``config.chunk_seconds`` are processed chunk by chunk;
    the result is the frame-weighted mean over chunks.
    """
    config = config or LsdConfig()
    ref, sr_ref = _samples(reference)
    est, sr_est = _samples(estimate)
    if ref.shape != est.shape:
        raise ShapeError(f"reference and estimate lengths differ: {ref.shape} vs {est.shape}")
    if sr_ref and sr_est and sr_ref != sr_est:
        raise ShapeError(f"sample rates differ: {sr_ref} vs {sr_est}")
    if ref.size == 0:
        raise EmptyInputError("empty signal")
    chunk = int(config.chunk_seconds * (sr_ref or sr_est or SAMPLE_RATE))
    frames = [_frame_lsd(ref[i : i + chunk], est[i : i + chunk], config) for i in range(0, ref.size, chunk)]
    return float(np.mean(np.concatenate(frames)))


@dataclass
class SystemRow:
    name: str
    scores: Dict[int, float]

    @property
    def average(self):
        return float(np.mean(list(self.scores.values())))


@dataclass
class EvalReport:
    bandwidths: List[int] = field(default_factory=lambda: list(DEFAULT_BANDWIDTHS))
    rows: List[SystemRow] = field(default_factory=list)

    def add(self, name, scores):
        self.rows.append(SystemRow(name, {int(b): float(scores[b]) for b in self.bandwidths}))
        return self

    def to_dict(self):
        return {
            "bandwidths_hz": list(self.bandwidths),
            "rows": [
                {"system": r.name, "lsd": {str(b): r.scores[b] for b in self.bandwidths}, "avg": r.average}
                for r in self.rows
            ],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _identity(samples):
    return samples


def _as_callable(model):
    if model is None:
        return _identity, "Input"
    if isinstance(model, Generator):
        return (lambda s: super_resolve(model, s)), "Generator"
    return model, getattr(model, "__name__", "System")


def evaluate_bandwidths(model, dataset, bandwidths=DEFAULT_BANDWIDTHS, config=None, name=None, report=None):
    """Degrade every track at each fixed cutoff, run ``model`` and score LSD.

    ``model`` may be ``None`` (pass-through, i.e. the "Input" row), a
    :class:`Generator`, or any callable mapping a 1-D array to a same-length
    array. Scores are averaged over tracks. Returns an :class:`EvalReport`
    (appending to ``report`` when given).
    """
    config = config or LsdConfig()
    tracks = list(dataset)
    if not tracks:
        raise EmptyInputError("evaluation dataset is empty")
    fn, default_name = _as_callable(model)
    bandwidths = [int(b) for b in bandwidths]
    scores = {}
    for bw in bandwidths:
        per_track = []
        for track in tracks:
            x, sr = _samples(track)
            s = degrade_fixed(x, bw, sr or SAMPLE_RATE)
            estimate = np.asarray(fn(s), dtype=np.float64)
            per_track.append(lsd(x, estimate, config))
        scores[bw] = float(np.mean(per_track))
    report = report or EvalReport(bandwidths)
    return report.add(name or default_name, scores)


def evaluate_estimates(references, estimates, bandwidths, config=None, name="External", report=None):
    """Score precomputed outputs. ``estimates[bw]`` lists arrays aligned with ``references``."""
    config = config or LsdConfig()
    scores = {}
    for bw in bandwidths:
        if len(estimates[bw]) != len(references):
            raise ShapeError(f"{len(estimates[bw])} estimates for {len(references)} references at {bw} Hz")
        scores[int(bw)] = float(np.mean([lsd(r, e, config) for r, e in zip(references, estimates[bw])]))
    report = report or EvalReport([int(b) for b in bandwidths])
    return report.add(name, scores)


def _bw_label(bw):
    return f"{bw / 1000:.1f}k"


def render_report(report):
    """Fixed two-decimal text table: one column per bandwidth, then ``| AVG``."""
    width = max([len("system")] + [len(r.name) for r in report.rows])
    header = " ".join(f"{_bw_label(b):>4}" for b in report.bandwidths)
    lines = [f"{'system':<{width}} {header} | AVG"]
    for row in report.rows:
        values = " ".join(f"{row.scores[b]:.2f}" for b in report.bandwidths)
        lines.append(f"{row.name:<{width}} {values} | {row.average:.2f}")
    return "\n".join(lines)
