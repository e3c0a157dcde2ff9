"""Monte Carlo sweeps comparing beamformer variants on synthetic scenes.

Each trial draws one scene; every requested method is evaluated on that same
scene so per-trial differences are paired.  Trial RNGs are derived from the
master seed and the (sweep value, trial) indices alone, which makes every
row reproducible in isolation and the output independent of worker
scheduling: rows are sorted before writing and float cells use ``repr``, so
a rerun with the same configuration is byte-identical.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, apply_sweep_value
from .metrics import si_sdr
from .pipeline import EnhanceResult, OracleFrequencies, enhance, mvdr_config
from .synth import Scene, mix_scene

CSV_COLUMNS = (
    "sweep_variable",
    "sweep_value",
    "trial",
    "method",
    "si_sdr_db",
    "si_sdr_improvement_db",
    "si_sdr_noisy_db",
    "max_constraint_residual",
    "master_seed",
    "value_index",
    "beta",
    "c_max",
    "n_mics",
    "isnr_db",
    "rt60_s",
    "inharmonicity_pct",
    "strategy",
    "oracle_frequencies",
)


def rng_for_trial(master_seed: int, value_index: int, trial: int) -> np.random.Generator:
    """The one place trial randomness comes from."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(value_index, trial))
    )


def run_method(method: str, scene: Scene, cfg: ExperimentConfig) -> EnhanceResult:
    """Evaluate one beamformer variant on a scene; ``+`` marks oracle RTFs."""
    pcfg = cfg.pipeline
    rtf = scene.oracle_rtf(pcfg.stft.fft_size) if method.endswith("+") else None
    if method.startswith("cMVDR"):
        oracle_freqs = None
        if cfg.oracle_frequencies:
            if scene.noise_draw is None:
                raise ValueError("oracle frequencies need a synthetically drawn noise")
            oracle_freqs = OracleFrequencies(
                fundamental_hz=scene.f0_nominal_hz,
                partials_hz=scene.noise_draw.partial_freqs_hz,
            )
        return enhance(scene.noisy, scene.noise_only, pcfg, rtf, oracle_freqs)
    return enhance(scene.noisy, scene.noise_only, mvdr_config(pcfg), rtf)


def run_trial(cfg: ExperimentConfig, value_index: int, trial: int) -> list[dict]:
    """All methods on one freshly drawn scene; returns one CSV row per method."""
    value = cfg.sweep_values[value_index]
    vcfg = apply_sweep_value(cfg, value)
    rng = rng_for_trial(cfg.master_seed, value_index, trial)
    scene = mix_scene(vcfg.scene, rng)
    target = scene.target_ref.channel(0)
    base_score = si_sdr(scene.noisy.channel(0), target)

    rows = []
    for method in cfg.methods:
        result = run_method(method, scene, vcfg)
        score = si_sdr(np.real(result.enhanced.channel(0)), target)
        rows.append(
            {
                "sweep_variable": cfg.sweep_variable,
                "sweep_value": value,
                "trial": trial,
                "method": method,
                "si_sdr_db": score,
                "si_sdr_improvement_db": score - base_score,
                "si_sdr_noisy_db": base_score,
                "max_constraint_residual": result.report["max_constraint_residual"],
                "master_seed": cfg.master_seed,
                "value_index": value_index,
                "beta": vcfg.scene.noise.beta,
                "c_max": vcfg.pipeline.c_max,
                "n_mics": vcfg.scene.n_mics,
                "isnr_db": vcfg.scene.isnr_db,
                "rt60_s": vcfg.scene.rt60_s,
                "inharmonicity_pct": vcfg.scene.noise.inharmonicity_pct,
                "strategy": vcfg.pipeline.strategy,
                "oracle_frequencies": cfg.oracle_frequencies,
            }
        )
    return rows


def _trial_star(args) -> list[dict]:
    return run_trial(*args)


def run_sweep(cfg: ExperimentConfig, out_dir) -> list[dict]:
    """Run the full sweep, write ``results.csv`` and ``summary.json``."""
    tasks = [
        (cfg, vi, t)
        for vi in range(len(cfg.sweep_values))
        for t in range(cfg.n_trials)
    ]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            per_trial = list(pool.map(_trial_star, tasks))
    else:
        per_trial = [run_trial(*t) for t in tasks]
    rows = [row for rows in per_trial for row in rows]
    rows.sort(key=lambda r: (r["value_index"], r["trial"], cfg.methods.index(r["method"])))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_rows_csv(rows, out_dir / "results.csv")
    summary = summarize(rows)
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return rows


def write_rows_csv(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_cell(row[c]) for c in CSV_COLUMNS])


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summarize(rows: list[dict]) -> dict:
    """Mean improvement with a normal-approximation 95% interval per cell."""
    cells: dict = {}
    for row in rows:
        cells.setdefault((row["sweep_value"], row["method"]), []).append(
            row["si_sdr_improvement_db"]
        )
    entries = []
    for (value, method), scores in sorted(
        cells.items(), key=lambda kv: (kv[0][0], kv[0][1])
    ):
        arr = np.asarray(scores)
        n = len(arr)
        std = float(np.std(arr, ddof=1)) if n > 1 else 0.0
        entries.append(
            {
                "sweep_value": value,
                "method": method,
                "n_trials": n,
                "mean_improvement_db": float(np.mean(arr)),
                "std_improvement_db": std,
                "ci95_halfwidth_db": 1.96 * std / np.sqrt(n) if n > 1 else 0.0,
            }
        )
    if not rows:
        return {"entries": []}
    return {
        "sweep_variable": rows[0]["sweep_variable"],
        "master_seed": rows[0]["master_seed"],
        "entries": entries,
    }
