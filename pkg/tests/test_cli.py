import json
import zipfile

import pytest
import yaml

from wavesr.audio import load_wave, save_wave
from wavesr.cli import main
from wavesr.generator import count_parameters
from wavesr.toydata import piano_like
from wavesr.training import load_generator

TINY = {
    "batch_size": 2,
    "segment_seconds": 0.128,
    "total_iterations": 2,
    "checkpoint_every": 2,
    "generator": {"depth": 2, "initial_channels": 4, "lstm_layers": 1},
}


@pytest.fixture
def wav_dir(tmp_path):
    d = tmp_path / "wavs"
    d.mkdir()
    save_wave(piano_like(1.0, seed=1), d / "a.wav")
    save_wave(piano_like(0.6, seed=2), d / "b.wav")
    return d


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(TINY))
    return path


@pytest.fixture
def trained(tmp_path, wav_dir, config_file):
    out = tmp_path / "run"
    assert main(["train", "--config", str(config_file), "--data-dir", str(wav_dir), "--output-dir", str(out),
                 "--precision", "64"]) == 0
    return out


def test_simulate_is_reproducible(tmp_path, wav_dir):
    for name in ("one", "two"):
        assert main(["simulate", str(wav_dir), "--output-dir", str(tmp_path / name), "--seed", "5"]) == 0
    for f in ("a.wav", "b.wav", "metadata.jsonl"):
        assert (tmp_path / "one" / f).read_bytes() == (tmp_path / "two" / f).read_bytes()
    records = [json.loads(line) for line in (tmp_path / "one" / "metadata.jsonl").read_text().splitlines()]
    assert [r["file"] for r in records] == ["a.wav", "b.wav"]
    assert all(2000 <= r["cutoff_hz"] <= 4000 and r["seed"] == 5 for r in records)
    manifest = json.loads((tmp_path / "one" / "manifest.json").read_text())
    assert manifest["command"] == "simulate" and manifest["seed"] == 5 and manifest["tool_version"]


def test_simulate_fixed_cutoff(tmp_path, wav_dir):
    assert main(["simulate", str(wav_dir), "--output-dir", str(tmp_path / "o"), "--cutoff", "3000"]) == 0
    record = json.loads((tmp_path / "o" / "metadata.jsonl").read_text().splitlines()[0])
    assert record["cutoff_hz"] == 3000.0 and record["order"] == 6
    assert len(load_wave(tmp_path / "o" / "a.wav")) == len(load_wave(wav_dir / "a.wav"))


def test_simulate_errors(tmp_path, wav_dir):
    assert main(["simulate", str(wav_dir), "--output-dir", str(tmp_path / "o"), "--cutoff", "1000"]) == 2
    assert not (tmp_path / "o").exists()
    assert main(["simulate", str(wav_dir), "--output-dir", str(tmp_path / "o"), "--cutoff", "1000",
                 "--allow-any-cutoff"]) == 0
    assert main(["simulate", str(tmp_path / "missing"), "--output-dir", str(tmp_path / "p")]) == 3
    (tmp_path / "empty").mkdir()
    assert main(["simulate", str(tmp_path / "empty"), "--output-dir", str(tmp_path / "q")]) == 3
    bad_dir = tmp_path / "bad"
    bad_dir.mkdir()
    (bad_dir / "x.wav").write_bytes(b"not a wav file")
    assert main(["simulate", str(bad_dir), "--output-dir", str(tmp_path / "r")]) == 3


def test_argument_errors_exit_2(tmp_path):
    assert main([]) == 2
    assert main(["simulate"]) == 2
    assert main(["evaluate", str(tmp_path), "--bandwidths", "abc"]) == 2


def test_train_writes_artifacts(trained):
    assert (trained / "manifest.json").exists()
    assert (trained / "config.yaml").exists()
    assert len((trained / "losses.jsonl").read_text().splitlines()) == 2
    assert (trained / "checkpoints" / "ckpt_00000002.ckpt").exists()
    saved = yaml.safe_load((trained / "config.yaml").read_text())
    assert saved["precision"] == 64 and saved["generator"]["initial_channels"] == 4


def test_resume_from_final_checkpoint_does_nothing(tmp_path, trained, wav_dir, config_file, capsys):
    ckpt = trained / "checkpoints" / "last.ckpt"
    out = tmp_path / "again"
    code = main(["train", "--config", str(config_file), "--data-dir", str(wav_dir), "--output-dir", str(out),
                 "--resume", str(ckpt), "--precision", "64"])
    assert code == 0
    assert "trained 0 iterations" in capsys.readouterr().out
    assert not (out / "losses.jsonl").exists() or (out / "losses.jsonl").read_text() == ""


def test_train_config_errors(tmp_path, wav_dir):
    assert main(["train", "--config", str(tmp_path / "none.yaml"), "--data-dir", str(wav_dir),
                 "--output-dir", str(tmp_path / "o")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("batch_sise: 2\n")
    assert main(["train", "--config", str(bad), "--data-dir", str(wav_dir), "--output-dir", str(tmp_path / "o")]) == 2
    (tmp_path / "empty").mkdir()
    assert main(["train", "--data-dir", str(tmp_path / "empty"), "--output-dir", str(tmp_path / "o")]) == 3


def test_env_overrides(tmp_path, wav_dir, config_file, monkeypatch):
    monkeypatch.setenv("WAVESR_CONFIG", str(config_file))
    monkeypatch.setenv("WAVESR_OUTPUT_DIR", str(tmp_path / "env"))
    monkeypatch.setenv("WAVESR_SEED", "11")
    assert main(["train", "--data-dir", str(wav_dir), "--iterations", "1"]) == 0
    saved = yaml.safe_load((tmp_path / "env" / "config.yaml").read_text())
    assert saved["seed"] == 11 and saved["total_iterations"] == 1
    monkeypatch.setenv("WAVESR_SEED", "eleven")
    assert main(["train", "--data-dir", str(wav_dir)]) == 2


def test_infer_generator_only_and_deterministic(tmp_path, trained, wav_dir, capsys):
    ckpt = trained / "checkpoints" / "last.ckpt"
    outs = [tmp_path / "o1" / "x.wav", tmp_path / "o2" / "x.wav"]
    for out in outs:
        out.parent.mkdir()
        assert main(["infer", str(ckpt), str(wav_dir / "a.wav"), str(out)]) == 0
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert len(load_wave(outs[0])) == len(load_wave(wav_dir / "a.wav"))
    capsys.readouterr()
    assert main(["info", "--checkpoint", str(ckpt)]) == 0
    info = json.loads(capsys.readouterr().out)["checkpoint"]
    loaded = count_parameters(load_generator(ckpt))
    assert loaded == info["generator_tensor_elements"]
    assert loaded < info["generator_tensor_elements"] + info["discriminator_tensor_elements"]


def test_infer_version_mismatch(tmp_path, wav_dir):
    bad = tmp_path / "old.ckpt"
    with zipfile.ZipFile(bad, "w") as zf:
        zf.writestr("meta.json", json.dumps({"format_version": 0, "iteration": 0, "config": {}}))
    assert main(["infer", str(bad), str(wav_dir / "a.wav"), str(tmp_path / "o.wav")]) == 5


def test_evaluate_passthrough(tmp_path, wav_dir, capsys):
    out = tmp_path / "eval"
    assert main(["evaluate", str(wav_dir), "--passthrough", "--output-dir", str(out)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split() == ["system", "2.5k", "3.0k", "3.5k", "4.0k", "|", "AVG"]
    assert lines[1].startswith("Input") and len(lines[1].split()) == 7
    results = json.loads((out / "results.json").read_text())
    assert results["bandwidths_hz"] == [2500, 3000, 3500, 4000]


def test_evaluate_custom_bandwidth_and_checkpoint(tmp_path, trained, wav_dir, capsys):
    ckpt = trained / "checkpoints" / "last.ckpt"
    assert main(["evaluate", str(wav_dir), "--passthrough", "--checkpoint", str(ckpt), "--bandwidths", "3000"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].split() == ["system", "3.0k", "|", "AVG"]
    assert [line.split()[0] for line in lines[1:]] == ["Input", "Generator"]


def test_evaluate_estimates_dir(tmp_path, wav_dir, capsys):
    est = tmp_path / "est" / "3000"
    est.mkdir(parents=True)
    for name in ("a.wav", "b.wav"):
        save_wave(load_wave(wav_dir / name), est / name)
    assert main(["evaluate", str(wav_dir), "--estimates-dir", str(tmp_path / "est"), "--bandwidths", "3000"]) == 0
    row = capsys.readouterr().out.strip().splitlines()[1].split()
    assert row[0] == "External" and float(row[1]) < 0.05


def test_evaluate_errors(tmp_path, wav_dir):
    (tmp_path / "empty").mkdir()
    assert main(["evaluate", str(tmp_path / "empty"), "--passthrough"]) == 3
    assert main(["evaluate", str(wav_dir)]) == 2


def test_info_reports_parameter_counts(capsys):
    assert main(["info"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert 100e6 <= info["generator_parameters"]["paper"] <= 200e6
    assert info["generator_parameters"]["desk"] > 0
