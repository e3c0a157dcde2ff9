"""End-to-end enhancement: estimation chain plus beamforming.

The full chain for one scene is

    noise-only reference channel -> periodogram -> resonant frequencies
    -> candidate shifts (integer-multiple or pairwise-difference rule)
    -> per-bin coherence filtering on the noisy reference channel
    -> stacked covariance of the noisy channels, diagonal loading
    -> RTF (covariance whitening, or a supplied oracle)
    -> per-bin distortionless weights -> synthesis.

Setting ``c_max = 0`` (or passing an empty frequency set) bypasses the
spectral stages entirely and yields the plain spatial MVDR.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import beamform, cyclospec
from .dsp import SignalBuffer, StftConfig, StftTensor, istft, stft

STRATEGIES = ("difference", "integer")
FREQ_SOURCES = ("noise", "noisy")
COV_MODES = ("batch", "recursive")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the enhancement pipeline needs besides the signals."""

    stft: StftConfig = field(default_factory=StftConfig)
    detection: cyclospec.PeakParams = field(default_factory=cyclospec.PeakParams)
    gamma_min: float = 0.6
    c_max: int = 8
    psd_floor_ratio: float = 1000.0
    kappa0: float = 1000.0
    smoothing: float = 0.95
    covariance: str = "batch"
    strategy: str = "difference"
    freq_source: str = "noise"

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.freq_source not in FREQ_SOURCES:
            raise ValueError(f"freq_source must be one of {FREQ_SOURCES}")
        if self.covariance not in COV_MODES:
            raise ValueError(f"covariance must be one of {COV_MODES}")
        if self.c_max < 0:
            raise ValueError(f"c_max must be nonnegative, got {self.c_max}")
        if not 0.0 <= self.gamma_min <= 1.0:
            raise ValueError(f"gamma_min must be in [0, 1], got {self.gamma_min}")


@dataclass(frozen=True)
class OracleFrequencies:
    """Ground-truth frequency information for toy experiments.

    ``fundamental_hz`` feeds the integer-multiple rule (the ideal harmonic
    model, deliberately unaware of any inharmonic deviation), while
    ``partials_hz`` holds the true component positions and feeds the
    pairwise-difference rule.
    """

    fundamental_hz: float
    partials_hz: np.ndarray


@dataclass
class EnhanceResult:
    enhanced: SignalBuffer
    report: dict
    mod_sets: list | None = None


def _taper_edges(sig: SignalBuffer, n: int) -> SignalBuffer:
    """Raised-cosine fade over ``n`` samples at both record ends.

    The abrupt start and stop of a finite recording are broadband events
    that appear, with identical phase structure, in every frequency bin of
    the few frames that straddle them.  Averaged cyclic cross-spectra then
    show strong spurious coherence between otherwise unrelated bins, which
    would leak energy-laden junk into the selected modulation sets.  Fading
    the edges of the analysis copy removes the artifact without touching
    the samples that are actually beamformed.
    """
    n = min(n, sig.n_samples // 2)
    if n == 0:
        return sig
    gain = 0.5 - 0.5 * np.cos(np.pi * np.arange(n) / n)
    samples = sig.samples.copy()
    samples[:, :n] *= gain
    samples[:, -n:] *= gain[::-1]
    return SignalBuffer(samples, sig.sample_rate_hz)


def select_modulation_sets(
    noisy: SignalBuffer,
    noise_only: SignalBuffer | None,
    cfg: PipelineConfig,
    oracle: OracleFrequencies | None = None,
) -> tuple[list, dict]:
    """Run the estimation chain up to the per-bin modulation sets."""
    k = cfg.stft.fft_size
    info: dict = {}
    if cfg.c_max == 0:
        info["candidates_hz"] = [0.0]
        info["resonant_freqs_hz"] = []
        return beamform.trivial_mod_sets(cfg.stft), info

    if oracle is not None:
        freqs = np.asarray(oracle.partials_hz, dtype=float)
        if cfg.strategy == "integer":
            candidates = cyclospec.candidate_shifts_integer(
                oracle.fundamental_hz, n_multiples=max(len(freqs), 1)
            )
        else:
            candidates = cyclospec.candidate_shifts_difference(freqs, merge_tol_hz=1e-9)
        info["resonant_freqs_hz"] = freqs.tolist()
    else:
        source = noise_only if (cfg.freq_source == "noise" and noise_only is not None) else noisy
        spectrum = cyclospec.periodogram(source, cfg.detection.fft_size)
        rfs = cyclospec.find_resonant_frequencies(
            spectrum, source.sample_rate_hz, cfg.detection
        )
        info["resonant_freqs_hz"] = rfs.freqs_hz.tolist()
        if len(rfs) == 0:
            info["candidates_hz"] = [0.0]
            return beamform.trivial_mod_sets(cfg.stft), info
        if cfg.strategy == "integer":
            candidates = cyclospec.candidate_shifts_integer(
                rfs.freqs_hz[0], n_multiples=len(rfs)
            )
        else:
            # Merge estimated pairwise differences at the analysis
            # resolution: shifts closer together than one STFT bin produce
            # indistinguishable, leakage-correlated modulated branches, and
            # sub-bin shifts alias the null branch itself.  (True partial
            # spacings are far above one bin, so nothing real is lost.)
            candidates = cyclospec.candidate_shifts_difference(
                rfs, merge_tol_hz=noisy.sample_rate_hz / k
            )
        # A nonzero shift below the detector's band floor cannot be a
        # spacing between resonant frequencies; such residues come from
        # spurious ripple peaks, and syllable-rate amplitude modulation of
        # the target is coherent at exactly those small separations.
        candidates = candidates[
            (candidates == 0.0) | (np.abs(candidates) >= cfg.detection.f_min_hz)
        ]

    info["candidates_hz"] = np.asarray(candidates).tolist()
    sets = cyclospec.coherence_filter(
        candidates, noisy, cfg.stft, cfg.gamma_min, cfg.c_max, cfg.psd_floor_ratio
    )
    return sets, info


def _per_bin_rtfs(
    stack: beamform.MultibandStack,
    cov: beamform.SpatialSpectralCov,
    noise_only: SignalBuffer | None,
    cfg: PipelineConfig,
    rtf_override: np.ndarray | None,
) -> np.ndarray:
    """RTF per bin, shape (fft_size, M): oracle override or covariance whitening."""
    m = stack.n_channels
    k = stack.n_bins
    if rtf_override is not None:
        rtf = np.asarray(rtf_override, dtype=complex)
        if rtf.shape != (m, k):
            raise ValueError(f"rtf override must be (n_mics, fft_size), got {rtf.shape}")
        return rtf.T
    if m == 1:
        return np.ones((k, 1), dtype=complex)
    if noise_only is None:
        raise ValueError("covariance-whitening RTF estimation needs a noise-only signal")
    v_tensor = stft(noise_only, cfg.stft)
    out = np.empty((k, m), dtype=complex)
    for kk in range(k):
        v = v_tensor.coeffs[:, kk, :]
        s_v = v @ v.conj().T / v.shape[1]
        s_v = beamform.diagonal_load(0.5 * (s_v + s_v.conj().T), cfg.kappa0)
        s_x = beamform.diagonal_load(cov[kk][:m, :m], cfg.kappa0)
        out[kk] = beamform.estimate_rtf_cw(s_x, s_v)
    return out


def enhance(
    noisy: SignalBuffer,
    noise_only: SignalBuffer | None,
    cfg: PipelineConfig,
    rtf_override: np.ndarray | None = None,
    oracle: OracleFrequencies | None = None,
) -> EnhanceResult:
    """Enhance the reference channel of a noisy multichannel recording.

    ``rtf_override`` (shape ``(n_mics, fft_size)``) replaces the estimated
    steering; ``oracle`` replaces the periodogram stage.  The report gathers
    per-bin diagnostics: selected-set-size histogram, condition numbers
    after loading, and the worst distortionless-constraint residual.

    The input is zero-padded by one frame on each side before analysis and
    trimmed after synthesis: weighted spectra are not consistent STFTs, so
    without the padding the overlap-add normalization would amplify the
    partially covered edge frames.  Coherence ratios and minimum-variance
    weights are invariant to the extra near-silent frames.  Modulation-set
    selection additionally runs on an edge-tapered copy of the inputs (see
    ``_taper_edges``); the beamformer itself consumes the original samples.
    """
    pad = cfg.stft.fft_size
    n_out = noisy.n_samples
    analysis = SignalBuffer(
        np.pad(_taper_edges(noisy, pad).samples, ((0, 0), (pad, pad))),
        noisy.sample_rate_hz,
    )
    noisy = SignalBuffer(
        np.pad(noisy.samples, ((0, 0), (pad, pad))), noisy.sample_rate_hz
    )
    noise_analysis = None if noise_only is None else _taper_edges(noise_only, pad)
    sets, info = select_modulation_sets(analysis, noise_analysis, cfg, oracle)
    stack = beamform.build_multiband_stack(noisy, sets, cfg.stft)
    cov = beamform.estimate_cov_batch(stack)
    rtfs = _per_bin_rtfs(stack, cov, noise_only, cfg, rtf_override)

    if cfg.covariance == "recursive":
        return _enhance_recursive(stack, rtfs, cfg, info, pad, n_out)

    m = stack.n_channels
    weights = []
    residuals = np.empty(stack.n_bins)
    conds = np.empty(stack.n_bins)
    for k in range(stack.n_bins):
        loaded = beamform.diagonal_load(cov[k], cfg.kappa0)
        steer = beamform.pad_rtf(rtfs[k], stack.set_size(k))
        w = beamform.cmvdr_weights(loaded, steer)
        weights.append(w)
        residuals[k] = np.abs(np.vdot(w, steer) - 1.0)
        eig = np.linalg.eigvalsh(loaded)
        conds[k] = eig[-1] / eig[0] if eig[0] > 0 else np.inf
    out = istft(beamform.apply_beamformer(weights, stack))
    enhanced = SignalBuffer(np.real(out.samples[:, pad : pad + n_out]), out.sample_rate_hz)

    sizes = np.array([len(s) for s in sets])
    hist = {int(c): int(np.sum(sizes == c)) for c in np.unique(sizes)}
    report = {
        "set_size_histogram": hist,
        "n_distinct_shifts": len(stack.distinct_shifts_hz),
        "max_constraint_residual": float(np.max(residuals)),
        "mean_constraint_residual": float(np.mean(residuals)),
        "condition_number_max": float(np.max(conds)),
        "condition_number_mean": float(np.mean(conds)),
        **info,
    }
    return EnhanceResult(enhanced=enhanced, report=report, mod_sets=sets)


def _enhance_recursive(
    stack: beamform.MultibandStack,
    rtfs: np.ndarray,
    cfg: PipelineConfig,
    info: dict,
    pad: int,
    n_out: int,
) -> EnhanceResult:
    """Frame-by-frame variant: smoothed covariance, weights refreshed per frame."""
    n_bins, n_frames = stack.n_bins, stack.n_frames
    out = np.empty((1, n_bins, n_frames), dtype=complex)
    max_resid = 0.0
    states: list = [None] * n_bins
    steers = [beamform.pad_rtf(rtfs[k], stack.set_size(k)) for k in range(n_bins)]
    for l in range(n_frames):
        for k in range(n_bins):
            z = stack.bin_matrix(k)[:, l]
            states[k] = beamform.estimate_cov_recursive(states[k], z, cfg.smoothing)
            loaded = beamform.diagonal_load(states[k], cfg.kappa0)
            if not np.any(loaded):
                # no energy observed yet (silent or zero-padded frames):
                # any distortionless vector gives zero output, pick the
                # matched filter
                w = steers[k] / np.real(np.vdot(steers[k], steers[k]))
            else:
                w = beamform.cmvdr_weights(loaded, steers[k])
            out[0, k, l] = np.vdot(w, z)
            max_resid = max(max_resid, float(np.abs(np.vdot(w, steers[k]) - 1.0)))
    synth = istft(
        StftTensor(
            coeffs=out,
            config=stack.config,
            sample_rate_hz=stack.sample_rate_hz,
            n_samples=stack.n_samples,
        )
    )
    enhanced = SignalBuffer(
        np.real(synth.samples[:, pad : pad + n_out]), synth.sample_rate_hz
    )
    sizes = np.array([len(s) for s in stack.mod_sets])
    report = {
        "set_size_histogram": {int(c): int(np.sum(sizes == c)) for c in np.unique(sizes)},
        "n_distinct_shifts": len(stack.distinct_shifts_hz),
        "max_constraint_residual": max_resid,
        **info,
    }
    return EnhanceResult(enhanced=enhanced, report=report, mod_sets=stack.mod_sets)


def mvdr_config(cfg: PipelineConfig) -> PipelineConfig:
    """The same configuration with the spectral stages disabled."""
    return replace(cfg, c_max=0)
