"""scikit-learn compatible wrappers.

``LowpassDegrader`` band-limits waveforms; ``BandwidthExtender`` trains the
adversarial generator in ``fit`` and applies it in ``transform``. Both accept
the same waveform containers (see :func:`check_waveforms`).
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .audio import SAMPLE_RATE, Waveform
from .degrade import DegradationPolicy, LowpassSpec, design_lowpass, filtfilt
from .evaluation import DEFAULT_BANDWIDTHS, LsdConfig, evaluate_bandwidths
from .exceptions import ConfigError, EmptyInputError
from .generator import GeneratorConfig, super_resolve
from .losses import LossWeights
from .training import Checkpoint, TrainConfig, Trainer, load_checkpoint, load_generator


def check_waveforms(X, sample_rate_hz=SAMPLE_RATE):
    """Coerce ``X`` to a list of 1-D float64 arrays.

    Accepts a single 1-D array, a 2-D array (one waveform per row), or a
    sequence of arrays / :class:`Waveform` objects. Waveforms at another rate
    are rejected rather than silently resampled.
    """
    if isinstance(X, Waveform):
        X = [X]
    elif isinstance(X, np.ndarray):
        if X.ndim == 1:
            X = [X]
        elif X.ndim != 2:
            raise ConfigError(f"expected 1-D or 2-D array, got {X.ndim}-D")
    out = []
    for item in X:
        if isinstance(item, Waveform):
            if item.sample_rate_hz != sample_rate_hz:
                raise ConfigError(f"waveform at {item.sample_rate_hz} Hz, expected {sample_rate_hz} Hz")
            arr = item.samples
        else:
            arr = np.asarray(item, dtype=np.float64)
        if arr.ndim != 1:
            raise ConfigError(f"each waveform must be 1-D, got shape {arr.shape}")
        if arr.size == 0:
            raise EmptyInputError("empty waveform")
        if not np.all(np.isfinite(arr)):
            raise ConfigError("waveforms must be finite")
        out.append(arr)
    if not out:
        raise EmptyInputError("no waveforms given")
    return out


class LowpassDegrader(TransformerMixin, BaseEstimator):
    """Zero-phase low-pass filtering, fixed or randomized per waveform.

    With ``cutoff_hz`` set, every input gets the same filter. Otherwise each
    waveform draws a cutoff uniformly from ``cutoff_range_hz`` and a
    family/order from the given choices.
    """

    def __init__(
        self,
        cutoff_hz=None,
        cutoff_range_hz=(2000.0, 4000.0),
        order=8,
        family="butterworth",
        family_choices=("butterworth", "chebyshev1"),
        order_choices=(6, 8),
        sample_rate_hz=SAMPLE_RATE,
        random_state=None,
    ):
        self.cutoff_hz = cutoff_hz
        self.cutoff_range_hz = cutoff_range_hz
        self.order = order
        self.family = family
        self.family_choices = family_choices
        self.order_choices = order_choices
        self.sample_rate_hz = sample_rate_hz
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if self.cutoff_hz is None:
            DegradationPolicy(tuple(self.cutoff_range_hz), tuple(self.family_choices), tuple(self.order_choices))
        else:
            design_lowpass(LowpassSpec(self.cutoff_hz, self.order, self.family), self.sample_rate_hz)
        self.rng_ = np.random.default_rng(self.random_state)
        return self

    def transform(self, X):
        check_is_fitted(self, "rng_")
        waves = check_waveforms(X, self.sample_rate_hz)
        self.specs_ = []
        out = []
        for w in waves:
            if self.cutoff_hz is None:
                spec = DegradationPolicy(
                    tuple(self.cutoff_range_hz), tuple(self.family_choices), tuple(self.order_choices)
                ).draw(self.rng_)
            else:
                spec = LowpassSpec(self.cutoff_hz, self.order, self.family)
            self.specs_.append(spec)
            out.append(filtfilt(w, design_lowpass(spec, self.sample_rate_hz)))
        return out


class BandwidthExtender(TransformerMixin, BaseEstimator):
    """Adversarially trained wave-to-wave bandwidth extension.

    ``fit(X)`` takes full-band recordings, simulates band-limited inputs on
    the fly and trains the generator against the multi-scale and
    multi-resolution discriminators. ``transform(X)`` maps band-limited
    recordings to full-band estimates.
    """

    def __init__(
        self,
        depth=3,
        initial_channels=32,
        lstm_layers=2,
        n_iterations=2000,
        batch_size=10,
        segment_seconds=2.56,
        learning_rate=1e-4,
        lambda_fm=2.0,
        lambda_mel=45.0,
        cutoff_range_hz=(2000.0, 4000.0),
        discriminator_preset="desk",
        precision=32,
        checkpoint_every=1000,
        output_dir=None,
        random_state=0,
    ):
        self.depth = depth
        self.initial_channels = initial_channels
        self.lstm_layers = lstm_layers
        self.n_iterations = n_iterations
        self.batch_size = batch_size
        self.segment_seconds = segment_seconds
        self.learning_rate = learning_rate
        self.lambda_fm = lambda_fm
        self.lambda_mel = lambda_mel
        self.cutoff_range_hz = cutoff_range_hz
        self.discriminator_preset = discriminator_preset
        self.precision = precision
        self.checkpoint_every = checkpoint_every
        self.output_dir = output_dir
        self.random_state = random_state

    def _train_config(self):
        return TrainConfig(
            batch_size=self.batch_size,
            segment_seconds=self.segment_seconds,
            total_iterations=self.n_iterations,
            learning_rate_g=self.learning_rate,
            learning_rate_d=self.learning_rate,
            seed=int(self.random_state or 0),
            precision=self.precision,
            checkpoint_every=self.checkpoint_every,
            discriminator_preset=self.discriminator_preset,
            generator=GeneratorConfig(
                depth=self.depth, initial_channels=self.initial_channels, lstm_layers=self.lstm_layers
            ),
            degradation=DegradationPolicy(cutoff_range_hz=tuple(self.cutoff_range_hz)),
            weights=LossWeights(self.lambda_fm, self.lambda_mel),
        )

    def fit(self, X, y=None):
        tracks = [Waveform(x) for x in check_waveforms(X)]
        config = self._train_config()
        self.loss_history_ = []
        trainer = Trainer(config)
        self.checkpoint_ = trainer.fit(
            tracks, output_dir=self.output_dir, callback=lambda it, bd: self.loss_history_.append(bd)
        )
        self.generator_ = trainer.generator.eval()
        self.n_iter_ = trainer.iteration
        return self

    @classmethod
    def from_checkpoint(cls, source):
        """Rebuild a fitted estimator (generator only) from a checkpoint path or object."""
        if isinstance(source, Checkpoint):
            config = source.train_config
            from .generator import Generator

            generator = Generator(config.generator).to(config.dtype)
            generator.load_state_dict(source.generator_state)
            iteration = source.iteration
        else:
            generator = load_generator(source)
            config = load_checkpoint(source, generator_only=True).train_config
            iteration = load_checkpoint(source, generator_only=True).iteration
        est = cls(
            depth=config.generator.depth,
            initial_channels=config.generator.initial_channels,
            lstm_layers=config.generator.lstm_layers,
            n_iterations=config.total_iterations,
            batch_size=config.batch_size,
            segment_seconds=config.segment_seconds,
            precision=config.precision,
            random_state=config.seed,
        )
        est.generator_ = generator.eval()
        est.n_iter_ = iteration
        return est

    def transform(self, X):
        check_is_fitted(self, "generator_")
        return [super_resolve(self.generator_, s) for s in check_waveforms(X)]

    def predict(self, X):
        return self.transform(X)

    def score(self, X, y=None, bandwidths=DEFAULT_BANDWIDTHS):
        """Negative mean LSD over ``bandwidths`` on ground-truth recordings ``X``."""
        check_is_fitted(self, "generator_")
        report = evaluate_bandwidths(self.generator_, check_waveforms(X), bandwidths, LsdConfig())
        return -report.rows[0].average
