"""Synthetic scenes: cyclostationary noise, room responses, mixing.

The noise generator produces a sum of cosine partials whose amplitudes are
slowly varying lowpassed Gaussian envelopes.  A single mixing knob ``beta``
morphs between one envelope shared by all partials (fully spectrally
correlated noise, ``beta = 1``) and independent envelopes per partial
(``beta = 0``), which is exactly the structure the cyclic beamformer feeds
on.  Partials sit at ``f0 * p * (1 + inharmonicity_pct / 100)``, so a
nonzero inharmonicity breaks the integer-multiple relation to the nominal
fundamental while pairwise spacings remain intact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .dsp import SignalBuffer


def lowpass_butter4(x: np.ndarray, cutoff_hz: float, sample_rate_hz: float) -> np.ndarray:
    """Zero-phase 4th-order Butterworth lowpass (two passes, -6 dB at cutoff)."""
    if not 0 < cutoff_hz < sample_rate_hz / 2:
        raise ValueError(f"cutoff must be in (0, fs/2), got {cutoff_hz}")
    sos = scipy.signal.butter(4, cutoff_hz, btype="low", fs=sample_rate_hz, output="sos")
    return scipy.signal.sosfiltfilt(sos, x, axis=-1)


@dataclass(frozen=True)
class HarmonicNoiseParams:
    """Parameters of the synthetic cyclostationary noise source."""

    n_components: int = 16
    f0_low_hz: float = 60.0
    f0_high_hz: float = 150.0
    beta: float = 0.8
    inharmonicity_pct: float = 0.0
    envelope_cutoff_hz: float = 5.0
    envelope_variance: float = 10.0
    amp_low: float = 1.0
    amp_high: float = 10.0

    def __post_init__(self):
        if self.n_components < 1:
            raise ValueError(f"need at least one component, got {self.n_components}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0, 1], got {self.beta}")
        if not 0 < self.f0_low_hz <= self.f0_high_hz:
            raise ValueError("fundamental range must satisfy 0 < low <= high")


@dataclass(frozen=True)
class CsNoiseDraw:
    """Realized random parameters of one generated noise signal."""

    f0_hz: float
    partial_freqs_hz: np.ndarray
    amplitudes: np.ndarray
    phases: np.ndarray
    n_dropped: int


def draw_cs_noise(
    params: HarmonicNoiseParams,
    sample_rate_hz: float,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[SignalBuffer, CsNoiseDraw]:
    """Generate the noise and return the drawn parameters alongside it."""
    p = params
    f0 = rng.uniform(p.f0_low_hz, p.f0_high_hz)
    amps = rng.uniform(p.amp_low, p.amp_high, size=p.n_components)
    phases = rng.uniform(-np.pi, np.pi, size=p.n_components)
    sigma = np.sqrt(p.envelope_variance)
    shared = sigma * rng.standard_normal(n_samples)
    own = sigma * rng.standard_normal((p.n_components, n_samples))
    shared = lowpass_butter4(shared, p.envelope_cutoff_hz, sample_rate_hz)
    own = lowpass_butter4(own, p.envelope_cutoff_hz, sample_rate_hz)

    scale = 1.0 + p.inharmonicity_pct / 100.0
    freqs = f0 * np.arange(1, p.n_components + 1) * scale
    keep = freqs < sample_rate_hz / 2.0
    n_dropped = int(np.sum(~keep))
    if n_dropped:
        warnings.warn(
            f"dropping {n_dropped} noise partials at or above Nyquist", stacklevel=2
        )

    n = np.arange(n_samples)
    u = np.zeros(n_samples)
    for i in np.flatnonzero(keep):
        envelope = (p.beta * shared + (1.0 - p.beta) * own[i]) * amps[i]
        u += envelope * np.cos(2.0 * np.pi * freqs[i] * n / sample_rate_hz + phases[i])
    buf = SignalBuffer(u[np.newaxis, :], sample_rate_hz)
    draw = CsNoiseDraw(
        f0_hz=float(f0),
        partial_freqs_hz=freqs[keep],
        amplitudes=amps,
        phases=phases,
        n_dropped=n_dropped,
    )
    return buf, draw


def gen_cs_noise(
    params: HarmonicNoiseParams,
    sample_rate_hz: float,
    n_samples: int,
    rng: np.random.Generator,
) -> SignalBuffer:
    """Synthetic cyclostationary noise (see module docstring for the model)."""
    return draw_cs_noise(params, sample_rate_hz, n_samples, rng)[0]


@dataclass(frozen=True)
class RirParams:
    """Synthetic room impulse response: unit direct path plus decaying tail.

    The tail is white Gaussian shaped by an exponential whose energy decays
    by 60 dB over ``rt60_s``; its level is set by the direct-to-reverberant
    energy ratio ``drr_db``.  ``rt60_s = 0`` gives a pure delayed impulse.
    """

    rt60_s: float = 0.3
    direct_delay_samples: int = 40
    drr_db: float = 3.0
    length_samples: int | None = None

    def __post_init__(self):
        if self.rt60_s < 0 or self.direct_delay_samples < 0:
            raise ValueError("rt60 and delay must be nonnegative")


def gen_rir(params: RirParams, sample_rate_hz: float, rng: np.random.Generator) -> np.ndarray:
    d = params.direct_delay_samples
    tail_len = int(round(params.rt60_s * sample_rate_hz))
    length = params.length_samples or (d + tail_len + 1)
    h = np.zeros(length)
    h[d] = 1.0
    if tail_len > 0 and length > d + 1:
        n = np.arange(1, length - d)
        decay = 10.0 ** (-3.0 * n / tail_len)
        # choose the tail variance so sum(var * decay^2) hits the target DRR
        target_energy = 10.0 ** (-params.drr_db / 10.0)
        sigma = np.sqrt(target_energy / np.sum(decay**2))
        h[d + 1 :] = sigma * decay * rng.standard_normal(len(n))
    return h


def gen_speech_like(
    sample_rate_hz: float, n_samples: int, rng: np.random.Generator
) -> SignalBuffer:
    """Synthetic speech surrogate: unsteady-pitch harmonics under formants.

    The fundamental wanders a few percent around 150 Hz with a correlation
    time of a few hundred milliseconds, and every harmonic carries its own
    phase jitter of about a radian that decorrelates within a syllable.
    Both are essential: they destroy the fixed-shift spectral correlation
    a steady comb would exhibit, so the target, unlike the noise, does
    not look cyclostationary to the coherence filter.  Fixed formant resonances shape the partial amplitudes, an
    explicit syllable sequence (voiced stretches separated by short
    pauses, smooth edges) gates the waveform, and a weak breath noise
    fills the gaps.  Normalized to unit RMS.
    """
    fs = sample_rate_hz
    drift = lowpass_butter4(rng.standard_normal(n_samples), 3.0, fs)
    drift = np.tanh(drift / (np.std(drift) + 1e-12))  # bounded excursion
    wobble = lowpass_butter4(rng.standard_normal(n_samples), 8.0, fs)
    wobble = np.tanh(wobble / (np.std(wobble) + 1e-12))
    f0 = 150.0 * 2.0 ** (0.05 * drift + 0.02 * wobble)
    phase = 2.0 * np.pi * np.cumsum(f0) / fs

    formants = np.array([500.0, 1500.0, 2500.0])
    bandwidths = np.array([90.0, 130.0, 180.0])
    n_harm = int(4000.0 / np.max(f0))
    sig = np.zeros(n_samples)
    f0_med = float(np.median(f0))
    for h in range(1, n_harm + 1):
        f_h = h * f0_med
        gain = np.sum(1.0 / (1.0 + ((f_h - formants) / bandwidths) ** 2))
        jitter = lowpass_butter4(rng.standard_normal(n_samples), 12.0, fs)
        jitter = 1.4 * jitter / (np.std(jitter) + 1e-12)
        sig += gain / np.sqrt(h) * np.cos(h * phase + jitter + rng.uniform(-np.pi, np.pi))

    gate = np.zeros(n_samples)
    t = 0
    while t < n_samples:
        on = int(rng.uniform(0.15, 0.40) * fs)
        off = int(rng.uniform(0.05, 0.15) * fs)
        seg = min(on, n_samples - t)
        level = rng.uniform(0.5, 1.0)
        edge = min(int(0.040 * fs), seg // 2)
        win = np.ones(seg)
        if edge > 0:
            ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(edge) / edge)
            win[:edge] = ramp
            win[seg - edge :] = ramp[::-1]
        gate[t : t + seg] = level * win
        t += on + off
    sig *= gate
    sig += 0.02 * np.std(sig) * rng.standard_normal(n_samples)
    rms = np.sqrt(np.mean(sig**2))
    if rms == 0.0:
        raise ValueError("generated target is silent")
    return SignalBuffer(sig[np.newaxis, :] / rms, fs)


@dataclass(frozen=True)
class SceneConfig:
    """Geometry-free description of one synthetic multichannel scene."""

    sample_rate_hz: float = 16000.0
    duration_s: float = 2.0
    n_mics: int = 2
    isnr_db: float = -10.0
    self_noise_snr_db: float = 30.0
    rt60_s: float = 0.3
    drr_db: float = 3.0
    noise: HarmonicNoiseParams = field(default_factory=HarmonicNoiseParams)
    delay_low_samples: int = 20
    delay_high_samples: int = 60
    max_mic_offset_samples: int = 4

    def __post_init__(self):
        if self.n_mics < 1:
            raise ValueError(f"need at least one mic, got {self.n_mics}")
        if self.duration_s <= 0:
            raise ValueError(f"duration must be positive, got {self.duration_s}")


@dataclass(frozen=True)
class Scene:
    """One mixed scene plus everything needed to rerun or score it.

    ``noisy`` is ``target_image + noise_only`` exactly; ``noise_only`` is the
    scaled convolved noise plus sensor self-noise, usable both for noise
    covariance estimation and resonant-frequency detection.  ``target_ref``
    is the reverberant target image at the reference mic (the scoring
    reference).
    """

    noisy: SignalBuffer
    target_ref: SignalBuffer
    noise_only: SignalBuffer
    target_delays: np.ndarray
    noise_delays: np.ndarray
    noise_draw: CsNoiseDraw | None
    f0_nominal_hz: float | None
    noise_gain: float
    self_noise_sigma: float

    def oracle_rtf(self, fft_size: int) -> np.ndarray:
        """Direct-path relative transfer function, shape ``(n_mics, fft_size)``.

        Ratio of the direct-path components of the target RIRs, which for
        unit impulses is a pure inter-mic delay term.
        """
        k = np.arange(fft_size)
        rel = self.target_delays - self.target_delays[0]
        return np.exp(-2j * np.pi * np.outer(rel, k) / fft_size)


def _convolve_to(dry: np.ndarray, h: np.ndarray, n: int) -> np.ndarray:
    return scipy.signal.fftconvolve(dry, h)[:n]


def mix_scene(
    cfg: SceneConfig,
    rng: np.random.Generator,
    target: SignalBuffer | None = None,
    noise: SignalBuffer | None = None,
) -> Scene:
    """Mix one target and one noise source into an M-mic noisy scene.

    Either source can be supplied (first channel used); otherwise the target
    is synthetic speech-like and the noise a fresh cyclostationary draw.
    The noise image is scaled so the reference mic sees ``isnr_db`` of
    target-to-interferer SNR, then independent white sensor noise is added
    at ``self_noise_snr_db`` below the reference target power.
    """
    fs = cfg.sample_rate_hz
    n = int(round(cfg.duration_s * fs))

    if target is None:
        target_dry = gen_speech_like(fs, n, rng).channel(0)
    else:
        if target.sample_rate_hz != fs:
            raise ValueError("target sample rate does not match the scene")
        target_dry = target.channel(0)[:n]
    if not np.any(target_dry):
        raise ValueError("target signal is silent")

    noise_draw = None
    f0_nominal = None
    if noise is None:
        noise_buf, noise_draw = draw_cs_noise(cfg.noise, fs, n, rng)
        noise_dry = noise_buf.channel(0)
        f0_nominal = noise_draw.f0_hz
    else:
        if noise.sample_rate_hz != fs:
            raise ValueError("noise sample rate does not match the scene")
        noise_dry = noise.channel(0)[:n]

    delays = []
    for _ in range(2):  # target then noise
        base = int(rng.integers(cfg.delay_low_samples, cfg.delay_high_samples + 1))
        offs = rng.integers(0, cfg.max_mic_offset_samples + 1, size=cfg.n_mics)
        offs[0] = 0
        delays.append(base + offs)
    target_delays, noise_delays = delays

    target_img = np.empty((cfg.n_mics, len(target_dry)))
    noise_img = np.empty((cfg.n_mics, len(noise_dry)))
    for m in range(cfg.n_mics):
        ht = gen_rir(
            RirParams(cfg.rt60_s, int(target_delays[m]), cfg.drr_db), fs, rng
        )
        hn = gen_rir(
            RirParams(cfg.rt60_s, int(noise_delays[m]), cfg.drr_db), fs, rng
        )
        target_img[m] = _convolve_to(target_dry, ht, len(target_dry))
        noise_img[m] = _convolve_to(noise_dry, hn, len(noise_dry))

    p_target = np.mean(target_img[0] ** 2)
    p_noise = np.mean(noise_img[0] ** 2)
    if p_target == 0.0:
        raise ValueError("target image at the reference mic is silent")
    if p_noise == 0.0:
        raise ValueError("noise image at the reference mic is silent")
    gain = np.sqrt(p_target / (p_noise * 10.0 ** (cfg.isnr_db / 10.0)))
    sigma_sn = np.sqrt(p_target * 10.0 ** (-cfg.self_noise_snr_db / 10.0))
    sensor = sigma_sn * rng.standard_normal(noise_img.shape)

    noise_only = gain * noise_img + sensor
    noisy = target_img + noise_only
    return Scene(
        noisy=SignalBuffer(noisy, fs),
        target_ref=SignalBuffer(target_img[0:1], fs),
        noise_only=SignalBuffer(noise_only, fs),
        target_delays=np.asarray(target_delays),
        noise_delays=np.asarray(noise_delays),
        noise_draw=noise_draw,
        f0_nominal_hz=f0_nominal,
        noise_gain=float(gain),
        self_noise_sigma=float(sigma_sn),
    )
