import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from wavesr.audio import Waveform
from wavesr.degrade import degrade_fixed
from wavesr.estimator import BandwidthExtender, LowpassDegrader, check_waveforms
from wavesr.exceptions import ConfigError, EmptyInputError
from wavesr.toydata import piano_like
from wavesr.training import TrainConfig, Trainer, save_checkpoint

SMALL = dict(depth=2, initial_channels=4, lstm_layers=1, n_iterations=2, batch_size=2, segment_seconds=0.128)


def test_check_waveforms_forms(rng):
    x = rng.normal(size=100)
    assert len(check_waveforms(x)) == 1
    assert len(check_waveforms(np.stack([x, x]))) == 2
    assert len(check_waveforms([x, Waveform(x)])) == 2
    with pytest.raises(ConfigError):
        check_waveforms(np.zeros((2, 2, 2)))
    with pytest.raises(ConfigError):
        check_waveforms([Waveform(x, 8000)])
    with pytest.raises(ConfigError):
        check_waveforms([np.array([1.0, np.nan])])
    with pytest.raises(EmptyInputError):
        check_waveforms([])
    with pytest.raises(EmptyInputError):
        check_waveforms([np.zeros(0)])


def test_degrader_params_and_clone():
    deg = LowpassDegrader(cutoff_hz=3000.0, random_state=3)
    assert deg.get_params()["cutoff_hz"] == 3000.0
    twin = clone(deg)
    assert twin.get_params() == deg.get_params() and twin is not deg


def test_fixed_degrader_matches_function(rng):
    x = rng.normal(size=4000)
    out = LowpassDegrader(cutoff_hz=3000.0).fit_transform([x])
    np.testing.assert_array_equal(out[0], degrade_fixed(x, 3000.0))


def test_random_degrader_is_seeded(rng):
    xs = [rng.normal(size=2000) for _ in range(5)]
    a = LowpassDegrader(random_state=1).fit(xs)
    b = LowpassDegrader(random_state=1).fit(xs)
    for u, v in zip(a.transform(xs), b.transform(xs)):
        np.testing.assert_array_equal(u, v)
    assert all(2000 <= s.cutoff_hz <= 4000 for s in a.specs_)
    with pytest.raises(NotFittedError):
        LowpassDegrader().transform(xs)
    with pytest.raises(ConfigError):
        LowpassDegrader(cutoff_range_hz=(1000, 3000)).fit(xs)


def test_extender_params_round_trip():
    est = BandwidthExtender(**SMALL)
    params = est.get_params()
    assert params["initial_channels"] == 4 and params["lambda_mel"] == 45.0
    assert clone(est).get_params() == params
    est.set_params(learning_rate=3e-4)
    assert est._train_config().learning_rate_g == 3e-4
    with pytest.raises(NotFittedError):
        est.transform([np.zeros(100)])


def test_extender_fit_transform_score(tmp_path):
    tracks = [piano_like(1.0, seed=4)]
    est = BandwidthExtender(**SMALL, output_dir=str(tmp_path)).fit(tracks)
    assert est.n_iter_ == 2 and len(est.loss_history_) == 2
    out = est.transform([tracks[0].samples[:3000]])
    assert out[0].shape == (3000,)
    np.testing.assert_array_equal(est.predict(tracks[0].samples[:3000])[0], out[0])
    assert np.isfinite(est.score([tracks[0].samples[:8000]], bandwidths=(3000,)))
    assert (tmp_path / "checkpoints" / "last.ckpt").exists()


def test_extender_from_checkpoint(tmp_path):
    est = BandwidthExtender(**SMALL)
    trainer = Trainer(est._train_config())
    path = tmp_path / "m.ckpt"
    save_checkpoint(trainer.checkpoint(), path)
    x = np.random.default_rng(0).normal(size=3000) * 0.1
    a = BandwidthExtender.from_checkpoint(path)
    b = BandwidthExtender.from_checkpoint(trainer.checkpoint())
    assert a.get_params()["initial_channels"] == 4
    np.testing.assert_array_equal(a.transform(x)[0], b.transform(x)[0])
    assert isinstance(a._train_config(), TrainConfig)
