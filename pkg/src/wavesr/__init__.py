"""Adversarial wave-to-wave bandwidth extension for music."""

__version__ = "0.1.0"

from .audio import SegmentSpec, Waveform, extract_segments, load_wave, normalize_loudness, save_wave
from .degrade import DegradationPolicy, LowpassSpec, apply_filter, design_lowpass, simulate_low_resolution
from .discriminators import DiscriminatorOutput, DiscriminatorSuite, MrdConfig, MsdConfig, init_discriminators
from .estimator import BandwidthExtender, LowpassDegrader, check_waveforms
from .evaluation import EvalReport, LsdConfig, evaluate_bandwidths, lsd, render_report
from .generator import Generator, GeneratorConfig, count_parameters, init_generator, valid_length
from .losses import LossBreakdown, LossWeights, total_discriminator_loss, total_generator_loss
from .spectral import MelConfig, SpectrogramConfig, build_mel_filterbank, mel_spectrogram, stft
from .training import Checkpoint, TrainConfig, Trainer, load_checkpoint, run_training, save_checkpoint

__all__ = [
    "BandwidthExtender",
    "Checkpoint",
    "DegradationPolicy",
    "DiscriminatorOutput",
    "DiscriminatorSuite",
    "EvalReport",
    "Generator",
    "GeneratorConfig",
    "LossBreakdown",
    "LossWeights",
    "LowpassDegrader",
    "LowpassSpec",
    "LsdConfig",
    "MelConfig",
    "MrdConfig",
    "MsdConfig",
    "SegmentSpec",
    "SpectrogramConfig",
    "TrainConfig",
    "Trainer",
    "Waveform",
    "apply_filter",
    "build_mel_filterbank",
    "check_waveforms",
    "count_parameters",
    "design_lowpass",
    "evaluate_bandwidths",
    "extract_segments",
    "init_discriminators",
    "init_generator",
    "load_checkpoint",
    "load_wave",
    "lsd",
    "mel_spectrogram",
    "normalize_loudness",
    "render_report",
    "run_training",
    "save_checkpoint",
    "save_wave",
    "simulate_low_resolution",
    "stft",
    "total_discriminator_loss",
    "total_generator_loss",
    "valid_length",
]
