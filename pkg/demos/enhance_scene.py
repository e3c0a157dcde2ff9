"""Enhance one synthetic scene and compare MVDR against the cyclic MVDR.

Simulates a two-microphone room with a speech-like target and strongly
correlated harmonic noise at -10 dB input SNR, then runs the plain spatial
beamformer and the cyclic variant on identical inputs.  The cyclic method
additionally exploits correlation between frequency-shifted copies of the
noise spectrum, so it can cancel noise even with fewer microphones than
sources.  Enhanced WAV files land in demo_out/ for listening.
"""

from pathlib import Path

import numpy as np

from cyclicbf import (
    HarmonicNoiseParams,
    OracleFrequencies,
    PipelineConfig,
    SceneConfig,
    enhance,
    mix_scene,
    si_sdr,
    write_wav,
)
from cyclicbf.pipeline import mvdr_config


def main():
    rng = np.random.default_rng(21)
    scene_cfg = SceneConfig(
        duration_s=4.0,
        isnr_db=-10.0,
        noise=HarmonicNoiseParams(beta=1.0, f0_low_hz=100.0),
    )
    scene = mix_scene(scene_cfg, rng)
    target = scene.target_ref.channel(0)
    base = si_sdr(scene.noisy.channel(0), target)
    print(f"scene: f0 = {scene.noise_draw.f0_hz:.1f} Hz, input SI-SDR {base:+.2f} dB")

    cfg = PipelineConfig()
    freqs = OracleFrequencies(
        fundamental_hz=scene.f0_nominal_hz,
        partials_hz=scene.noise_draw.partial_freqs_hz,
    )

    out = Path("demo_out")
    out.mkdir(exist_ok=True)
    write_wav(out / "noisy.wav", scene.noisy)

    print(f"{'method':<8} {'SI-SDR':>8} {'gain':>8}  modulation sets")
    for name, pcfg, oracle in [
        ("MVDR", mvdr_config(cfg), None),
        ("cMVDR", cfg, freqs),
    ]:
        res = enhance(scene.noisy, scene.noise_only, pcfg, oracle=oracle)
        est = np.real(res.enhanced.channel(0))
        score = si_sdr(est, target)
        hist = res.report["set_size_histogram"]
        multi = sum(v for size, v in hist.items() if size > 1)
        print(
            f"{name:<8} {score:8.2f} {score - base:+8.2f}  "
            f"{res.report['n_distinct_shifts']} distinct shifts, {multi} stacked bins"
        )
        write_wav(out / f"{name.lower()}.wav", type(scene.noisy)(est[None, :], scene.noisy.sample_rate_hz))

    print(f"\nWAVs written to {out}/ (noisy, mvdr, cmvdr)")


if __name__ == "__main__":
    main()
