"""Adversarial training loop, checkpoints and loss logging."""
from __future__ import annotations

import copy
import io
import json
import logging
import math
import os
import zipfile
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import torch

from .audio import SAMPLE_RATE, SegmentSpec, load_wave, segment_offsets
from .degrade import DegradationPolicy, design_lowpass, filtfilt
from .discriminators import (
    MRD_LAYERS_DESK,
    MRD_LAYERS_FULL,
    MSD_LAYERS_DESK,
    MSD_LAYERS_FULL,
    MrdConfig,
    MsdConfig,
    init_discriminators,
)
from .exceptions import (
    AudioIOError,
    CheckpointVersionError,
    ConfigError,
    DivergenceError,
    EmptyInputError,
)
from .generator import Generator, GeneratorConfig, init_generator
from .losses import LossBreakdown, LossWeights, total_discriminator_loss, total_generator_loss
from .spectral import MelConfig

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAX_NONFINITE_STEPS = 3

_DISC_PRESETS = {
    "desk": (MSD_LAYERS_DESK, MRD_LAYERS_DESK),
    "full": (MSD_LAYERS_FULL, MRD_LAYERS_FULL),
}


@dataclass
class TrainConfig:
    batch_size: int = 10
    segment_seconds: float = 2.56
    sample_rate_hz: int = SAMPLE_RATE
    total_iterations: int = 2000
    learning_rate_g: float = 1e-4
    learning_rate_d: float = 1e-4
    adam_betas: tuple = (0.8, 0.99)
    weight_decay: float = 0.01
    lr_decay: float = 0.999
    lr_decay_every: int = 1000
    grad_clip_norm: float = None
    seed: int = 0
    precision: int = 32
    checkpoint_every: int = 1000
    discriminator_preset: str = "desk"
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    degradation: DegradationPolicy = field(default_factory=DegradationPolicy)
    weights: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if isinstance(self.generator, dict):
            self.generator = GeneratorConfig(**self.generator)
        if isinstance(self.degradation, dict):
            self.degradation = DegradationPolicy(**self.degradation)
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)
        self.adam_betas = tuple(self.adam_betas)
        if self.batch_size < 1 or self.total_iterations < 1:
            raise ConfigError("batch_size and total_iterations must be >= 1")
        if self.learning_rate_g < 0 or self.learning_rate_d < 0:
            raise ConfigError("learning rates must be non-negative")
        if self.precision not in (32, 64):
            raise ConfigError("precision must be 32 or 64")
        if self.discriminator_preset not in _DISC_PRESETS:
            raise ConfigError(f"discriminator_preset must be one of {sorted(_DISC_PRESETS)}")
        if self.checkpoint_every < 1 or self.lr_decay_every < 1:
            raise ConfigError("checkpoint_every and lr_decay_every must be >= 1")

    @property
    def segment(self):
        return SegmentSpec(self.segment_seconds, self.sample_rate_hz)

    @property
    def dtype(self):
        return torch.float64 if self.precision == 64 else torch.float32

    def msd_config(self):
        return MsdConfig(layers=_DISC_PRESETS[self.discriminator_preset][0])

    def mrd_config(self):
        return MrdConfig(layers=_DISC_PRESETS[self.discriminator_preset][1])

    def learning_rate(self, base, iteration):
        """Step decay: ``base * lr_decay ** (iteration // lr_decay_every)``."""
        return base * self.lr_decay ** (iteration // self.lr_decay_every)

    def to_dict(self):
        d = asdict(self)
        d["adam_betas"] = list(self.adam_betas)
        d["degradation"]["cutoff_range_hz"] = list(self.degradation.cutoff_range_hz)
        d["degradation"]["family_choices"] = list(self.degradation.family_choices)
        d["degradation"]["order_choices"] = list(self.degradation.order_choices)
        return d

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown TrainConfig keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def smoke(cls, **overrides):
        """Small, fast settings for CPU smoke runs."""
        params = dict(batch_size=4, segment_seconds=0.512, total_iterations=2000, checkpoint_every=500)
        params.update(overrides)
        return cls(**params)


# -- data -------------------------------------------------------------------

def load_dataset(directory, sample_rate_hz=SAMPLE_RATE):
    """All ``*.wav`` files in ``directory`` (sorted by name) as Waveforms."""
    directory = Path(directory)
    if not directory.is_dir():
        raise AudioIOError(f"dataset directory {directory} does not exist")
    paths = sorted(directory.glob("*.wav"))
    if not paths:
        raise EmptyInputError(f"no .wav files in {directory}")
    return [load_wave(p, sample_rate_hz) for p in paths]


def make_batch(dataset, config, rng):
    """Sample ground-truth segments and their band-limited counterparts.

    Returns ``(x, s, specs)`` with ``x`` and ``s`` shaped ``[batch, samples]``.
    """
    segment = config.segment
    n = segment.length_samples
    eligible = [w for w in dataset if len(w) >= n]
    if not eligible:
        raise EmptyInputError(f"dataset has no track of at least {n} samples")
    xs, ss, specs = [], [], []
    for _ in range(config.batch_size):
        track = eligible[int(rng.integers(len(eligible)))]
        (offset,) = segment_offsets(len(track), segment, rng, 1)
        x = track.samples[offset : offset + n]
        spec = config.degradation.draw(rng)
        xs.append(x)
        ss.append(filtfilt(x, design_lowpass(spec, track.sample_rate_hz)))
        specs.append(spec)
    to_t = lambda rows: torch.from_numpy(np.stack(rows)).to(config.dtype)  # noqa: E731
    return to_t(xs), to_t(ss), specs


# -- optimisation -------------------------------------------------------------

def make_optimizers(generator, discriminator, config):
    opt_g = torch.optim.AdamW(
        generator.parameters(), lr=config.learning_rate_g, betas=config.adam_betas, weight_decay=config.weight_decay
    )
    opt_d = torch.optim.AdamW(
        discriminator.parameters(), lr=config.learning_rate_d, betas=config.adam_betas, weight_decay=config.weight_decay
    )
    return opt_g, opt_d


def _set_requires_grad(module, flag):
    for p in module.parameters():
        p.requires_grad_(flag)


def _step(optimizer, module, loss, clip):
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    if clip:
        torch.nn.utils.clip_grad_norm_(module.parameters(), clip)
    optimizer.step()


def train_step(generator, discriminator, optimizers, batch, weights=None, mel_config=None, grad_clip_norm=None):
    """One discriminator update followed by one generator update.

    Raises :class:`DivergenceError` (before stepping) when a loss is not finite.
    """
    opt_g, opt_d = optimizers
    x, s = batch[0], batch[1]
    weights = weights or LossWeights()

    g = generator(s)

    _set_requires_grad(discriminator, True)
    loss_d, bd_d = total_discriminator_loss(discriminator(x), discriminator(g.detach()))
    if not math.isfinite(bd_d.total_d):
        raise DivergenceError(f"non-finite discriminator loss {bd_d.total_d}", bd_d)
    _step(opt_d, discriminator, loss_d, grad_clip_norm)

    _set_requires_grad(discriminator, False)
    try:
        fake = discriminator(g)
        with torch.no_grad():
            real = discriminator(x)
        loss_g, bd_g = total_generator_loss(fake, real, x, g, weights, mel_config)
    finally:
        _set_requires_grad(discriminator, True)
    breakdown = LossBreakdown(bd_g.adv_g_per_k, bd_g.fm_per_k, bd_g.mel, bd_g.total_g, bd_d.adv_d_per_k, bd_d.total_d)
    if not breakdown.is_finite():
        raise DivergenceError(f"non-finite generator loss {bd_g.total_g}", breakdown)
    _step(opt_g, generator, loss_g, grad_clip_norm)
    return breakdown


# -- checkpoints ------------------------------------------------------------

@dataclass
class Checkpoint:
    iteration: int
    config: dict
    generator_state: dict
    discriminator_state: dict = None
    optimizer_g_state: dict = None
    optimizer_d_state: dict = None
    rng_state: dict = None
    torch_rng_state: torch.Tensor = None
    format_version: int = FORMAT_VERSION

    @property
    def train_config(self):
        return TrainConfig.from_dict(copy.deepcopy(self.config))


def _torch_bytes(obj):
    buf = io.BytesIO()
    torch.save(obj, buf)
    return buf.getvalue()


def _torch_load(data):
    return torch.load(io.BytesIO(data), map_location="cpu", weights_only=True)


def save_checkpoint(ckpt, path):
    """Write a zip archive: ``meta.json`` plus one torch member per component."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": ckpt.format_version,
        "iteration": ckpt.iteration,
        "config": ckpt.config,
        "rng_state": ckpt.rng_state,
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    with zipfile.ZipFile(tmp, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("meta.json", json.dumps(meta))
        zf.writestr("generator.pt", _torch_bytes(ckpt.generator_state))
        if ckpt.discriminator_state is not None:
            zf.writestr("discriminator.pt", _torch_bytes(ckpt.discriminator_state))
            zf.writestr(
                "optimizers.pt",
                _torch_bytes({"g": ckpt.optimizer_g_state, "d": ckpt.optimizer_d_state, "torch_rng": ckpt.torch_rng_state}),
            )
    os.replace(tmp, path)


def read_checkpoint_meta(path):
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
    except (OSError, KeyError, zipfile.BadZipFile) as exc:
        raise AudioIOError(f"cannot read checkpoint {path}: {exc}") from exc
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format {meta.get('format_version')} is not supported (expected {FORMAT_VERSION})"
        )
    return meta


def load_checkpoint(path, generator_only=False):
    """Load a checkpoint. With ``generator_only`` the discriminator and
    optimizer members are never read from the archive."""
    meta = read_checkpoint_meta(path)
    with zipfile.ZipFile(path) as zf:
        ckpt = Checkpoint(
            iteration=meta["iteration"],
            config=meta["config"],
            generator_state=_torch_load(zf.read("generator.pt")),
            rng_state=meta.get("rng_state"),
            format_version=meta["format_version"],
        )
        if not generator_only and "discriminator.pt" in zf.namelist():
            ckpt.discriminator_state = _torch_load(zf.read("discriminator.pt"))
            opt = _torch_load(zf.read("optimizers.pt"))
            ckpt.optimizer_g_state, ckpt.optimizer_d_state = opt["g"], opt["d"]
            ckpt.torch_rng_state = opt["torch_rng"]
    return ckpt


def load_generator(path):
    """Generator (only) from a checkpoint, in the precision it was trained in."""
    ckpt = load_checkpoint(path, generator_only=True)
    config = ckpt.train_config
    model = Generator(config.generator).to(config.dtype)
    model.load_state_dict(ckpt.generator_state)
    model.eval()
    return model


def parameter_checksum(module):
    """Order-sensitive float64 digest of all parameters (for before/after checks)."""
    h = 0.0
    with torch.no_grad():
        for i, p in enumerate(module.parameters()):
            flat = p.detach().double().flatten()
            h += float((flat * torch.arange(1, flat.numel() + 1, dtype=torch.float64)).sum()) * (i + 1)
    return h


# -- training driver ----------------------------------------------------------

class Trainer:
    """Holds both networks, their optimizers and the data RNG."""

    def __init__(self, config, checkpoint=None):
        self.config = config
        self.mel_config = MelConfig(sample_rate_hz=config.sample_rate_hz)
        self.generator = init_generator(config.generator, seed=config.seed, dtype=config.dtype)
        self.discriminator = init_discriminators(
            config.msd_config(), config.mrd_config(), seed=config.seed + 1, dtype=config.dtype
        )
        self.opt_g, self.opt_d = make_optimizers(self.generator, self.discriminator, config)
        self.rng = np.random.default_rng(config.seed)
        self.iteration = 0
        if checkpoint is not None:
            self._restore(checkpoint)

    def _restore(self, ckpt):
        if ckpt.discriminator_state is None:
            raise ConfigError("checkpoint has no discriminator/optimizer state; cannot resume")
        self.generator.load_state_dict(ckpt.generator_state)
        self.discriminator.load_state_dict(ckpt.discriminator_state)
        self.opt_g.load_state_dict(ckpt.optimizer_g_state)
        self.opt_d.load_state_dict(ckpt.optimizer_d_state)
        self.rng.bit_generator.state = ckpt.rng_state
        if ckpt.torch_rng_state is not None:
            torch.set_rng_state(ckpt.torch_rng_state)
        self.iteration = ckpt.iteration

    def checkpoint(self):
        return Checkpoint(
            iteration=self.iteration,
            config=self.config.to_dict(),
            generator_state=copy.deepcopy(self.generator.state_dict()),
            discriminator_state=copy.deepcopy(self.discriminator.state_dict()),
            optimizer_g_state=copy.deepcopy(self.opt_g.state_dict()),
            optimizer_d_state=copy.deepcopy(self.opt_d.state_dict()),
            rng_state=self.rng.bit_generator.state,
            torch_rng_state=torch.get_rng_state(),
        )

    def _apply_schedule(self):
        for opt, base in ((self.opt_g, self.config.learning_rate_g), (self.opt_d, self.config.learning_rate_d)):
            for group in opt.param_groups:
                group["lr"] = self.config.learning_rate(base, self.iteration)

    def step(self, batch):
        self._apply_schedule()
        breakdown = train_step(
            self.generator,
            self.discriminator,
            (self.opt_g, self.opt_d),
            batch,
            self.config.weights,
            self.mel_config,
            self.config.grad_clip_norm,
        )
        self.iteration += 1
        return breakdown

    def fit(self, dataset, output_dir=None, log_path=None, callback=None):
        """Train until ``config.total_iterations``; returns the final Checkpoint."""
        if not dataset:
            raise EmptyInputError("dataset is empty")
        output_dir = Path(output_dir) if output_dir else None
        ckpt_dir = output_dir / "checkpoints" if output_dir else None
        if output_dir and log_path is None:
            log_path = output_dir / "losses.jsonl"
        last_good = None
        if ckpt_dir:
            last_good = ckpt_dir / "last.ckpt"
            if not last_good.exists():
                save_checkpoint(self.checkpoint(), last_good)
        log = open(log_path, "a", encoding="utf-8") if log_path else None
        failures = 0
        try:
            while self.iteration < self.config.total_iterations:
                batch = make_batch(dataset, self.config, self.rng)
                try:
                    breakdown = self.step(batch)
                except DivergenceError as exc:
                    failures += 1
                    logger.warning("iteration %d: %s", self.iteration + 1, exc)
                    self.iteration += 1
                    if failures >= MAX_NONFINITE_STEPS:
                        raise DivergenceError(
                            f"{failures} consecutive non-finite steps; aborting",
                            exc.breakdown,
                            last_good,
                        ) from exc
                    continue
                failures = 0
                if log:
                    record = breakdown.to_record(
                        iteration=self.iteration,
                        lr_g=self.opt_g.param_groups[0]["lr"],
                        lr_d=self.opt_d.param_groups[0]["lr"],
                    )
                    log.write(json.dumps(record) + "\n")
                if callback:
                    callback(self.iteration, breakdown)
                if ckpt_dir and (
                    self.iteration % self.config.checkpoint_every == 0 or self.iteration == self.config.total_iterations
                ):
                    ckpt = self.checkpoint()
                    save_checkpoint(ckpt, ckpt_dir / f"ckpt_{self.iteration:08d}.ckpt")
                    save_checkpoint(ckpt, last_good)
        finally:
            if log:
                log.close()
        return self.checkpoint()


def run_training(config, dataset, resume=None, output_dir=None, callback=None):
    """Train from scratch or from ``resume`` (a Checkpoint or a path to one)."""
    if resume is not None and not isinstance(resume, Checkpoint):
        resume = load_checkpoint(resume)
    trainer = Trainer(config, resume)
    return trainer.fit(dataset, output_dir=output_dir, callback=callback)
