"""Command-line entry point: ``wavesr {simulate,train,infer,evaluate,info}``.

Settings resolve in order config file < environment (``WAVESR_*``) < flags.
Exit codes: 0 success, 2 config, 3 I/O or data, 4 divergence, 5 checkpoint version.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import torch
import yaml

from . import __version__
from .audio import Waveform, load_wave, save_wave
from .degrade import DegradationPolicy, LowpassSpec, apply_filter, design_lowpass
from .evaluation import DEFAULT_BANDWIDTHS, EvalReport, evaluate_bandwidths, evaluate_estimates, render_report
from .exceptions import AudioIOError, ConfigError, EmptyInputError, WaveSRError
from .generator import GeneratorConfig, count_parameters, count_parameters_for, super_resolve
from .training import (
    TrainConfig,
    load_checkpoint,
    load_dataset,
    load_generator,
    read_checkpoint_meta,
    run_training,
)

logger = logging.getLogger("wavesr")

ENV_PREFIX = "WAVESR_"
ENV_KEYS = ("config", "seed", "output_dir", "precision")


def _env_defaults():
    out = {}
    for key in ENV_KEYS:
        value = os.environ.get(ENV_PREFIX + key.upper())
        if value is not None:
            out[key] = value
    return out


def _resolve(args, key, cast=None):
    """Flag value if given, else environment, else None."""
    value = getattr(args, key, None)
    if value is None:
        value = _env_defaults().get(key)
    if value is not None and cast is not None:
        try:
            value = cast(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return value


def _read_config_file(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return data


def write_manifest(output_dir, command, args, seed=None, config_path=None):
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise AudioIOError(f"cannot create {output_dir}: {exc}") from exc
    manifest = {
        "command": command,
        "config_path": str(config_path) if config_path else None,
        "seed": seed,
        "output_dir": str(output_dir),
        "started_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "tool_version": __version__,
        "argv": {k: v for k, v in vars(args).items() if k != "func"},
    }
    (output_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str), encoding="utf-8")
    return manifest


def _wav_paths(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise AudioIOError(f"{directory} is not a directory")
    paths = sorted(directory.glob("*.wav"))
    if not paths:
        raise EmptyInputError(f"no .wav files in {directory}")
    return paths


# -- simulate ---------------------------------------------------------------

def cmd_simulate(args):
    seed = _resolve(args, "seed", int) or 0
    output_dir = _resolve(args, "output_dir")
    if output_dir is None:
        raise ConfigError("--output-dir is required")
    low, high = args.cutoff_range
    if args.cutoff is not None:
        low = high = args.cutoff
    if not args.allow_any_cutoff and (low < 2000 or high > 4000):
        raise ConfigError(f"cutoff {low}-{high} Hz outside [2000, 4000]; pass --allow-any-cutoff")
    policy = None
    if args.cutoff is None:
        policy = DegradationPolicy(
            (low, high),
            tuple(args.families),
            tuple(args.orders),
            allow_any_cutoff=args.allow_any_cutoff,
        )
    paths = _wav_paths(args.input_dir)
    write_manifest(output_dir, "simulate", args, seed)
    streams = np.random.SeedSequence(seed).spawn(len(paths))
    records = []
    for path, stream in zip(paths, streams):
        wave = load_wave(path)
        if policy is None:
            spec = LowpassSpec(args.cutoff, args.orders[0], args.families[0])
        else:
            spec = policy.draw(np.random.default_rng(stream))
        degraded = apply_filter(wave, design_lowpass(spec, wave.sample_rate_hz))
        save_wave(degraded, Path(output_dir) / path.name)
        records.append({"file": path.name, "seed": seed, **spec.as_dict()})
    with open(Path(output_dir) / "metadata.jsonl", "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    print(f"wrote {len(records)} degraded files to {output_dir}")
    return 0


# -- train ------------------------------------------------------------------

def _train_config(args):
    config_path = _resolve(args, "config")
    data = _read_config_file(config_path) if config_path else {}
    seed = _resolve(args, "seed", int)
    precision = _resolve(args, "precision", int)
    if seed is not None:
        data["seed"] = seed
    if precision is not None:
        data["precision"] = precision
    if args.iterations is not None:
        data["total_iterations"] = args.iterations
    return TrainConfig.from_dict(data), config_path


def cmd_train(args):
    config, config_path = _train_config(args)
    output_dir = _resolve(args, "output_dir")
    if output_dir is None:
        raise ConfigError("--output-dir is required")
    resume = load_checkpoint(args.resume) if args.resume else None
    dataset = load_dataset(args.data_dir, config.sample_rate_hz)
    write_manifest(output_dir, "train", args, config.seed, config_path)
    (Path(output_dir) / "config.yaml").write_text(yaml.safe_dump(config.to_dict(), sort_keys=False), encoding="utf-8")
    start = resume.iteration if resume else 0
    final = run_training(config, dataset, resume=resume, output_dir=output_dir)
    print(f"trained {final.iteration - start} iterations (now at {final.iteration}); checkpoints in {output_dir}/checkpoints")
    return 0


# -- infer ------------------------------------------------------------------

def cmd_infer(args):
    meta = read_checkpoint_meta(args.checkpoint)
    model = load_generator(args.checkpoint)
    precision = _resolve(args, "precision", int)
    if precision == 64:
        model = model.double()
    elif precision == 32:
        model = model.float()
    output_dir = _resolve(args, "output_dir") or str(Path(args.output).parent)
    write_manifest(output_dir, "infer", args, meta["config"].get("seed"))
    wave = load_wave(args.input)
    out = super_resolve(model, wave.samples, chunk_samples=int(30 * wave.sample_rate_hz))
    save_wave(Waveform(out, wave.sample_rate_hz), args.output)
    print(f"loaded {count_parameters(model)} generator parameters; wrote {args.output}")
    return 0


# -- evaluate ---------------------------------------------------------------

def _parse_bandwidths(text):
    try:
        values = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad bandwidth list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty bandwidth list")
    return values


def cmd_evaluate(args):
    if not args.passthrough and not args.checkpoint and not args.estimates_dir:
        raise ConfigError("give --checkpoint, --passthrough or --estimates-dir")
    paths = _wav_paths(args.dataset_dir)
    tracks = [load_wave(p) for p in paths]
    output_dir = _resolve(args, "output_dir")
    if output_dir:
        write_manifest(output_dir, "evaluate", args, None)
    report = EvalReport(list(args.bandwidths))
    if args.passthrough:
        evaluate_bandwidths(None, tracks, args.bandwidths, name="Input", report=report)
    if args.checkpoint:
        model = load_generator(args.checkpoint)
        evaluate_bandwidths(model, tracks, args.bandwidths, name=args.name or "Generator", report=report)
    if args.estimates_dir:
        estimates = {}
        for bw in args.bandwidths:
            sub = Path(args.estimates_dir) / str(bw)
            estimates[bw] = [load_wave(sub / p.name).samples for p in paths]
        evaluate_estimates([t.samples for t in tracks], estimates, args.bandwidths, name="External", report=report)
    print(render_report(report))
    if output_dir:
        (Path(output_dir) / "results.json").write_text(report.to_json(), encoding="utf-8")
    return 0


# -- info -------------------------------------------------------------------

def cmd_info(args):
    info = {
        "version": __version__,
        "torch": torch.__version__,
        "generator_parameters": {
            "desk": count_parameters_for(GeneratorConfig.desk()),
            "paper": count_parameters_for(GeneratorConfig.paper()),
        },
    }
    if args.checkpoint:
        meta = read_checkpoint_meta(args.checkpoint)
        ckpt = load_checkpoint(args.checkpoint)
        n_gen = sum(t.numel() for t in ckpt.generator_state.values())
        n_disc = sum(t.numel() for t in (ckpt.discriminator_state or {}).values())
        info["checkpoint"] = {
            "format_version": meta["format_version"],
            "iteration": meta["iteration"],
            "generator_tensor_elements": n_gen,
            "discriminator_tensor_elements": n_disc,
        }
    print(json.dumps(info, indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="wavesr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="YAML config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--output-dir", default=None)
        p.add_argument("--precision", type=int, choices=(32, 64), default=None)

    p = sub.add_parser("simulate", help="band-limit a directory of WAV files")
    common(p)
    p.add_argument("input_dir")
    p.add_argument("--cutoff", type=float, default=None, help="fixed cutoff in Hz")
    p.add_argument("--cutoff-range", type=float, nargs=2, default=(2000.0, 4000.0), metavar=("LOW", "HIGH"))
    p.add_argument("--allow-any-cutoff", action="store_true")
    p.add_argument("--families", nargs="+", default=["butterworth", "chebyshev1"])
    p.add_argument("--orders", type=int, nargs="+", default=[6, 8])
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="adversarial training")
    common(p)
    p.add_argument("--data-dir", required=True, help="directory of full-band WAV files")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--iterations", type=int, default=None, help="override total_iterations")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="super-resolve one WAV file")
    common(p)
    p.add_argument("checkpoint")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="LSD at fixed bandwidths")
    common(p)
    p.add_argument("dataset_dir")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--passthrough", action="store_true", help="score the degraded input itself")
    p.add_argument("--estimates-dir", default=None, help="precomputed outputs in <dir>/<bandwidth>/<name>.wav")
    p.add_argument("--bandwidths", type=_parse_bandwidths, default=list(DEFAULT_BANDWIDTHS))
    p.add_argument("--name", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("info", help="versions and parameter counts")
    common(p)
    p.add_argument("--checkpoint", default=None)
    p.set_defaults(func=cmd_info)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except WaveSRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
