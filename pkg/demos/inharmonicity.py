"""Shift-selection strategies under inharmonic detuning.

The integer-multiple strategy places candidate shifts at r * f0 and breaks
when the partials drift away from exact multiples, because a fixed-percent
detuning error grows linearly with the partial index.  Pairwise differences
of the actually detected partial frequencies track the detuning by
construction.  A slow noise envelope (narrow coherence peaks in the shift
variable) makes the contrast sharp at half a percent detuning.

Runs a few paired trials per detuning value; expect several dB for both
strategies at 0% and a collapse of the integer strategy at 0.5%.
"""

import numpy as np

from cyclicbf import ExperimentConfig, HarmonicNoiseParams, PipelineConfig, SceneConfig
from cyclicbf.experiments import run_trial

N_TRIALS = 4


def strategy_config(strategy: str) -> ExperimentConfig:
    return ExperimentConfig(
        sweep_variable="inharmonicity_pct",
        sweep_values=(0.0, 0.5),
        n_trials=N_TRIALS,
        methods=("MVDR", "cMVDR"),
        master_seed=123,
        oracle_frequencies=True,
        scene=SceneConfig(
            duration_s=4.0,
            isnr_db=-10.0,
            noise=HarmonicNoiseParams(beta=1.0, envelope_cutoff_hz=0.25, f0_low_hz=100.0),
        ),
        pipeline=PipelineConfig(strategy=strategy),
    )


def mean_gap(cfg: ExperimentConfig, value_index: int) -> float:
    gaps = []
    for trial in range(cfg.n_trials):
        rows = run_trial(cfg, value_index, trial)
        imp = {r["method"]: r["si_sdr_improvement_db"] for r in rows}
        gaps.append(imp["cMVDR"] - imp["MVDR"])
    return float(np.mean(gaps))


def main():
    print(f"cMVDR advantage over MVDR, mean of {N_TRIALS} paired trials (dB)")
    print(f"{'strategy':<22} {'0% detuning':>12} {'0.5% detuning':>14}")
    for strategy in ("integer", "difference"):
        cfg = strategy_config(strategy)
        g0 = mean_gap(cfg, 0)
        g5 = mean_gap(cfg, 1)
        print(f"{strategy:<22} {g0:12.2f} {g5:14.2f}")
    print("\nthe difference strategy keeps its gain because detected-partial")
    print("differences move with the detuning; integer multiples of f0 do not.")


if __name__ == "__main__":
    main()
