import json

import numpy as np
import pytest

from oracles import oracle_lsd
from wavesr.audio import Waveform
from wavesr.evaluation import (
    DEFAULT_BANDWIDTHS,
    EvalReport,
    LsdConfig,
    evaluate_bandwidths,
    evaluate_estimates,
    lsd,
    render_report,
)
from wavesr.exceptions import EmptyInputError, ShapeError
from wavesr.generator import GeneratorConfig, init_generator


def test_identical_signals_have_zero_lsd(rng):
    x = rng.normal(size=16000)
    assert lsd(x, x) == 0.0


def test_uniform_scaling_by_tenth():
    rng = np.random.default_rng(0)
    x = rng.normal(size=32000) * 0.5
    assert lsd(x, 0.1 * x) == pytest.approx(2.0, abs=1e-3)


def test_matches_oracle_on_random_pairs():
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = int(rng.integers(2000, 12000))
        ref = rng.normal(size=n) * rng.uniform(0.01, 1)
        est = ref + rng.normal(size=n) * rng.uniform(0.001, 0.5)
        assert lsd(ref, est) == pytest.approx(oracle_lsd(ref, est), rel=1e-6)


def test_symmetric(rng):
    a, b = rng.normal(size=5000), rng.normal(size=5000)
    assert lsd(a, b) == pytest.approx(lsd(b, a), rel=1e-12)


def test_chunking_weights_frames():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=40000), rng.normal(size=40000)
    config = LsdConfig(chunk_seconds=1.0)
    chunks = [(x[i : i + 16000], y[i : i + 16000]) for i in range(0, 40000, 16000)]
    frames = [len(a) // 512 + 1 for a, _ in chunks]
    expected = sum(f * lsd(a, b) for f, (a, b) in zip(frames, chunks)) / sum(frames)
    assert lsd(x, y, config) == pytest.approx(expected, rel=1e-12)


def test_lsd_errors():
    with pytest.raises(ShapeError):
        lsd(np.zeros(100), np.zeros(101))
    with pytest.raises(ShapeError):
        lsd(Waveform(np.ones(100), 16000), Waveform(np.ones(100), 8000))
    with pytest.raises(EmptyInputError):
        lsd(np.zeros(0), np.zeros(0))


def test_passthrough_lsd_falls_as_cutoff_rises():
    rng = np.random.default_rng(3)
    tracks = [Waveform(rng.normal(size=16000) * 0.1)]
    report = evaluate_bandwidths(None, tracks)
    scores = [report.rows[0].scores[b] for b in DEFAULT_BANDWIDTHS]
    assert report.rows[0].name == "Input"
    assert all(a > b for a, b in zip(scores, scores[1:]))


def test_callable_and_generator_models():
    rng = np.random.default_rng(4)
    tracks = [rng.normal(size=8000) * 0.1]
    identity = evaluate_bandwidths(None, tracks, [3000])
    as_callable = evaluate_bandwidths(lambda s: s, tracks, [3000], name="Copy")
    assert as_callable.rows[0].scores[3000] == identity.rows[0].scores[3000]
    model = init_generator(GeneratorConfig(), seed=0)
    report = evaluate_bandwidths(model, tracks, [3000])
    assert report.rows[0].name == "Generator" and np.isfinite(report.rows[0].average)
    with pytest.raises(EmptyInputError):
        evaluate_bandwidths(None, [], [3000])


def test_render_matches_published_rows():
    report = EvalReport().add("Input", dict(zip(DEFAULT_BANDWIDTHS, (2.43, 2.19, 1.97, 1.78))))
    report.add("Best", dict(zip(DEFAULT_BANDWIDTHS, (0.83, 0.79, 0.76, 0.73))))
    text = render_report(report).splitlines()
    assert text[0].split() == ["system", "2.5k", "3.0k", "3.5k", "4.0k", "|", "AVG"]
    assert text[1].endswith("2.43 2.19 1.97 1.78 | 2.09")
    assert text[2].endswith("0.83 0.79 0.76 0.73 | 0.78")
    assert report.rows[1].average == pytest.approx(0.7775)


def test_report_json_round_trip():
    report = EvalReport([3000]).add("Input", {3000: 1.5})
    data = json.loads(report.to_json())
    assert data == {"bandwidths_hz": [3000], "rows": [{"system": "Input", "lsd": {"3000": 1.5}, "avg": 1.5}]}


def test_evaluate_estimates():
    rng = np.random.default_rng(5)
    refs = [rng.normal(size=4000) for _ in range(2)]
    estimates = {3000: [r * 0.1 for r in refs]}
    report = evaluate_estimates(refs, estimates, [3000])
    assert report.rows[0].scores[3000] == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ShapeError):
        evaluate_estimates(refs, {3000: refs[:1]}, [3000])
