"""Multichannel STFT framework and frequency-shift (modulation) primitives.

Conventions used throughout the package:

* time signals are stored as 2-D arrays of shape ``(n_channels, n_samples)``;
* the analysis window is multiplied onto each frame before an unnormalized
  K-point forward DFT (``numpy.fft.fft``); the inverse transform carries the
  ``1/K`` factor;
* the full K-bin complex spectrum is kept for every frame.  Modulated
  (frequency-shifted) inputs are complex, so conjugate symmetry cannot be
  assumed anywhere downstream;
* frame ``l`` covers samples ``[l*R, l*R + K)`` and the ragged tail of a
  signal is zero-padded up to the full frame grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_WINDOW_KINDS = ("sqrt_hann", "rectangular")


def make_window(kind: str, fft_size: int) -> np.ndarray:
    """Return an analysis window of length ``fft_size``.

    ``sqrt_hann`` is the square root of the periodic Hann window, so that
    analysis followed by synthesis with the same window applies one full
    Hann taper, which overlap-adds to a constant for hops of ``K/4`` and
    ``K/2``.
    """
    if fft_size < 2:
        raise ValueError(f"fft_size must be >= 2, got {fft_size}")
    if kind == "rectangular":
        return np.ones(fft_size)
    if kind == "sqrt_hann":
        n = np.arange(fft_size)
        hann = 0.5 * (1.0 - np.cos(2.0 * np.pi * n / fft_size))
        return np.sqrt(hann)
    raise ValueError(f"unknown window kind {kind!r}, expected one of {_WINDOW_KINDS}")


def num_frames(n_samples: int, fft_size: int, hop: int) -> int:
    """Number of STFT frames for a signal of ``n_samples`` samples.

    Defined as ``ceil(1 + (n_samples - fft_size) / hop)``: one frame for the
    first ``fft_size`` samples plus one per started hop, counting the padded
    tail frame.
    """
    if n_samples < fft_size:
        raise ValueError(
            f"signal too short for one frame ({n_samples} < {fft_size}); zero-pad first"
        )
    if hop < 1:
        raise ValueError(f"hop must be >= 1, got {hop}")
    return int(np.ceil(1.0 + (n_samples - fft_size) / hop))


@dataclass(frozen=True)
class SignalBuffer:
    """Uniformly sampled multichannel signal, shape ``(n_channels, n_samples)``."""

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.ndim == 1:
            s = s[np.newaxis, :]
        if s.ndim != 2 or s.shape[0] < 1 or s.shape[1] < 1:
            raise ValueError(f"samples must be (n_channels, n_samples), got shape {s.shape}")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", s)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz

    def channel(self, m: int) -> np.ndarray:
        return self.samples[m]


@dataclass(frozen=True)
class StftConfig:
    """STFT analysis/synthesis parameters.

    The perfect-reconstruction (constant overlap-add of the squared window)
    property of the sqrt-Hann window is verified numerically at construction
    for the standard hops ``K/4`` and ``K/2``.
    """

    fft_size: int = 2048
    hop: int = 512
    window: str = "sqrt_hann"

    def __post_init__(self):
        if self.fft_size < 2:
            raise ValueError(f"fft_size must be >= 2, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise ValueError(f"hop must be in [1, fft_size], got {self.hop}")
        w = make_window(self.window, self.fft_size)  # validates the kind
        if self.window == "sqrt_hann" and self.hop in (self.fft_size // 4, self.fft_size // 2):
            acc = _ola_envelope(w**2, self.hop, n_frames=8)
            mid = acc[self.fft_size : self.fft_size + self.hop]
            if np.max(np.abs(mid - mid[0])) > 1e-12 * np.max(mid):
                raise ValueError(
                    f"window {self.window!r} does not overlap-add to a constant at hop {self.hop}"
                )

    def window_array(self) -> np.ndarray:
        return make_window(self.window, self.fft_size)


def _ola_envelope(wsq: np.ndarray, hop: int, n_frames: int) -> np.ndarray:
    """Overlap-add ``n_frames`` copies of a squared window at the given hop."""
    k = len(wsq)
    acc = np.zeros(k + (n_frames - 1) * hop)
    for l in range(n_frames):
        acc[l * hop : l * hop + k] += wsq
    return acc


@dataclass(frozen=True)
class StftTensor:
    """Complex STFT coefficients, shape ``(n_channels, fft_size, n_frames)``.

    ``n_samples`` records the pre-padding length of the analyzed signal so
    that a round trip through :func:`istft` can be trimmed back to it.
    """

    coeffs: np.ndarray
    config: StftConfig
    sample_rate_hz: float
    n_samples: int | None = field(default=None)

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.ndim != 3:
            raise ValueError(f"coeffs must be 3-D (channels, bins, frames), got shape {c.shape}")
        if c.shape[1] != self.config.fft_size:
            raise ValueError(
                f"bin axis has length {c.shape[1]}, expected fft_size {self.config.fft_size}"
            )
        if not np.iscomplexobj(c):
            c = c.astype(complex)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_channels(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[2]

    def channel(self, m: int) -> np.ndarray:
        """Single-channel view of shape ``(fft_size, n_frames)``."""
        return self.coeffs[m]

    def bin_freqs_hz(self) -> np.ndarray:
        return np.fft.fftfreq(self.config.fft_size, d=1.0 / self.sample_rate_hz)


def modulate(x: SignalBuffer, alpha_hz: float) -> SignalBuffer:
    """Multiply every channel by ``exp(j 2 pi alpha_hz n / fs)``.

    Shifts spectral content upward by ``alpha_hz`` when positive, so after an
    STFT, bin ``k`` of the modulated signal reads the original spectrum at
    ``f_k - alpha_hz``.  The output is complex for any nonzero shift.
    """
    if alpha_hz == 0.0:
        return SignalBuffer(x.samples.astype(complex), x.sample_rate_hz)
    n = np.arange(x.n_samples)
    carrier = np.exp(2j * np.pi * alpha_hz * n / x.sample_rate_hz)
    return SignalBuffer(x.samples * carrier, x.sample_rate_hz)


def stft(x: SignalBuffer, cfg: StftConfig) -> StftTensor:
    """Windowed short-time Fourier transform of every channel.

    The signal is zero-padded at the tail so the last (possibly partial)
    frame exists; signals shorter than one frame are padded up to it.
    """
    k, r = cfg.fft_size, cfg.hop
    n_orig = x.n_samples
    n_eff = max(n_orig, k)
    n_frm = num_frames(n_eff, k, r)
    total = k + (n_frm - 1) * r
    pad = total - n_orig
    s = np.pad(x.samples, ((0, 0), (0, pad)))
    frames = np.lib.stride_tricks.sliding_window_view(s, k, axis=1)[:, ::r, :]
    w = cfg.window_array()
    spec = np.fft.fft(frames * w, axis=-1)  # (channels, frames, bins)
    return StftTensor(
        coeffs=np.ascontiguousarray(spec.transpose(0, 2, 1)),
        config=cfg,
        sample_rate_hz=x.sample_rate_hz,
        n_samples=n_orig,
    )


def istft(tensor: StftTensor, length: int | None = None) -> SignalBuffer:
    """Weighted overlap-add synthesis, dividing by the accumulated squared window.

    Wherever the accumulated squared window is (numerically) zero, for
    example the very first sample under a sqrt-Hann window, the output is
    set to zero.  The result is complex; real pipelines take the real part
    after beamforming.  ``length`` trims the output; it defaults to the
    original signal length recorded by :func:`stft` when available.
    """
    cfg = tensor.config
    k, r = cfg.fft_size, cfg.hop
    n_ch, _, n_frm = tensor.coeffs.shape
    w = cfg.window_array()

    frames = np.fft.ifft(tensor.coeffs, axis=1)  # (channels, bins->time, frames)
    frames = frames.transpose(0, 2, 1) * w  # (channels, frames, time)

    total = k + (n_frm - 1) * r
    acc = np.zeros((n_ch, total), dtype=complex)
    for l in range(n_frm):
        acc[:, l * r : l * r + k] += frames[:, l, :]
    env = _ola_envelope(w**2, r, n_frm)
    env_max = np.max(env)
    if env_max <= 0.0:
        raise ValueError("window/hop pair has no overlap-add coverage")
    covered = env > 1e-12 * env_max
    out = np.zeros_like(acc)
    out[:, covered] = acc[:, covered] / env[covered]

    if length is None:
        length = tensor.n_samples if tensor.n_samples is not None else total
    if length > total:
        out = np.pad(out, ((0, 0), (0, length - total)))
    return SignalBuffer(out[:, :length], tensor.sample_rate_hz)
