"""Command-line interface.

Subcommands::

    cyclicbf analyze INPUT.wav     resonant frequencies, coherence map, sets
    cyclicbf enhance NOISY.wav     beamform a noisy recording to a mono WAV
    cyclicbf simulate              synthesize one scene to WAV files
    cyclicbf sweep                 Monte Carlo comparison, CSV + JSON summary

All subcommands accept ``--config FILE`` (TOML), ``--seed``, ``--out-dir``
and ``--dump-config``; sweep-style options (``--trials``, ``--methods``,
``--strategy``) override the corresponding config entries.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import audio_io, cyclospec
from .beamform import NumericalError
from .config import ExperimentConfig, dump_config, load_config
from .dsp import SignalBuffer
from .experiments import run_sweep
from .pipeline import enhance, select_modulation_sets
from .synth import mix_scene

_STRATEGY_FLAG = {"x": "integer", "delta": "difference"}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--out-dir", default="cyclicbf_out", help="output directory")
    p.add_argument("--trials", type=int, help="number of Monte Carlo trials")
    p.add_argument("--methods", help="comma-separated subset of MVDR,MVDR+,cMVDR,cMVDR+")
    p.add_argument(
        "--strategy",
        choices=sorted(_STRATEGY_FLAG),
        help="shift selection rule: x (integer multiples) or delta (differences)",
    )
    p.add_argument(
        "--dump-config", action="store_true", help="print the effective config and exit"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cyclicbf",
        description="Cyclic MVDR beamforming for cyclostationary noise suppression",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="estimate resonant frequencies and coherence")
    p.add_argument("input", help="WAV file to analyze (reference channel used)")
    _add_common(p)

    p = sub.add_parser("enhance", help="enhance a noisy multichannel WAV")
    p.add_argument("input", help="noisy multichannel WAV")
    p.add_argument("--noise-wav", help="noise-only WAV for covariance/frequency estimation")
    _add_common(p)

    p = sub.add_parser("simulate", help="synthesize one scene to WAV files")
    _add_common(p)

    p = sub.add_parser("sweep", help="run a Monte Carlo sweep")
    _add_common(p)
    return parser


def _effective_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.trials is not None:
        cfg = replace(cfg, n_trials=args.trials)
    if args.methods is not None:
        cfg = replace(cfg, methods=tuple(m.strip() for m in args.methods.split(",")))
    if args.strategy is not None:
        cfg = replace(
            cfg, pipeline=replace(cfg.pipeline, strategy=_STRATEGY_FLAG[args.strategy])
        )
    return cfg


def cmd_analyze(args, cfg: ExperimentConfig) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    buf = audio_io.read_wav(args.input)
    pcfg = cfg.pipeline

    spectrum = cyclospec.periodogram(buf, pcfg.detection.fft_size)
    rfs = cyclospec.find_resonant_frequencies(spectrum, buf.sample_rate_hz, pcfg.detection)
    with open(out / "resonant_frequencies.json", "w") as fh:
        json.dump(
            {
                "freqs_hz": rfs.freqs_hz.tolist(),
                "peak_amplitudes": rfs.peak_amplitudes.tolist(),
                "grid_hz": rfs.grid_hz,
            },
            fh,
            indent=2,
        )

    if len(rfs) == 0:
        candidates = np.zeros(1)
    elif pcfg.strategy == "integer":
        candidates = cyclospec.candidate_shifts_integer(rfs.freqs_hz[0], len(rfs))
    else:
        candidates = cyclospec.candidate_shifts_difference(rfs)
    gamma, _ = cyclospec.cyclic_coherence(buf, candidates, pcfg.stft, pcfg.psd_floor_ratio)
    bin_freqs = np.fft.fftfreq(pcfg.stft.fft_size, d=1.0 / buf.sample_rate_hz)
    with open(out / "coherence_map.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["shift_hz", "bin_hz", "gamma"])
        for p, shift in enumerate(candidates):
            for k in range(pcfg.stft.fft_size):
                writer.writerow([repr(float(shift)), repr(float(bin_freqs[k])), repr(float(gamma[p, k]))])

    sets, _ = select_modulation_sets(buf, None, replace(pcfg, freq_source="noisy"))
    with open(out / "modulation_sets.json", "w") as fh:
        json.dump(
            [
                {
                    "bin": s.bin_index,
                    "bin_hz": float(bin_freqs[s.bin_index]),
                    "shifts_hz": s.shifts_hz.tolist(),
                    "coherences": s.coherences.tolist(),
                }
                for s in sets
            ],
            fh,
        )
    print(f"analyze: {len(rfs)} resonant frequencies, {len(candidates)} candidate shifts")
    return 0


def cmd_enhance(args, cfg: ExperimentConfig) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    noisy = audio_io.read_wav(args.input)
    noise_only = audio_io.read_wav(args.noise_wav) if args.noise_wav else None
    if noise_only is None and noisy.n_channels > 1:
        print(
            "enhance: --noise-wav is required for multichannel input "
            "(noise covariance and steering estimation)",
            file=sys.stderr,
        )
        return 1
    result = enhance(noisy, noise_only, cfg.pipeline)
    enhanced = result.enhanced
    audio_io.write_wav(
        out / "enhanced.wav",
        SignalBuffer(np.real(enhanced.samples[0:1]), enhanced.sample_rate_hz),
        encoding="float32",
    )
    with open(out / "report.json", "w") as fh:
        json.dump(result.report, fh, indent=2, sort_keys=True)
    print(f"enhance: wrote {out / 'enhanced.wav'}")
    return 0


def cmd_simulate(args, cfg: ExperimentConfig) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed))
    scene = mix_scene(cfg.scene, rng)
    audio_io.write_wav(out / "noisy.wav", scene.noisy)
    audio_io.write_wav(out / "target_ref.wav", scene.target_ref)
    audio_io.write_wav(out / "noise_only.wav", scene.noise_only)
    manifest = {
        "master_seed": cfg.master_seed,
        "target_delays": scene.target_delays.tolist(),
        "noise_delays": scene.noise_delays.tolist(),
        "noise_gain": scene.noise_gain,
        "self_noise_sigma": scene.self_noise_sigma,
        "f0_nominal_hz": scene.f0_nominal_hz,
    }
    if scene.noise_draw is not None:
        manifest["noise_draw"] = {
            "f0_hz": scene.noise_draw.f0_hz,
            "partial_freqs_hz": scene.noise_draw.partial_freqs_hz.tolist(),
            "amplitudes": scene.noise_draw.amplitudes.tolist(),
            "phases": scene.noise_draw.phases.tolist(),
            "n_dropped": scene.noise_draw.n_dropped,
        }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    print(f"simulate: wrote scene WAVs and manifest to {out}")
    return 0


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    out = Path(args.out_dir)
    rows = run_sweep(cfg, out)
    print(f"sweep: {len(rows)} rows -> {out / 'results.csv'}")
    return 0


_COMMANDS = {
    "analyze": cmd_analyze,
    "enhance": cmd_enhance,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _effective_config(args)
        if args.dump_config:
            print(dump_config(cfg), end="")
            return 0
        return _COMMANDS[args.command](args, cfg)
    except (ValueError, NumericalError, OSError) as exc:
        print(f"cyclicbf {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
