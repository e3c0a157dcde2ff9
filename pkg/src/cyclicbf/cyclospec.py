"""Cyclic spectrum estimation and frequency-shift selection.

A cyclostationary noise source (an engine hum, an alarm, any machine with a
rotation period) carries correlation not only across time but across
frequency: spectral components spaced by a resonant frequency share their
(slowly varying) amplitude envelope.  This module estimates that structure
and decides, per STFT bin, which frequency-shifted copies of the input are
worth stacking next to the unshifted one:

* :func:`acp_estimate` -- time-averaged cyclic periodogram between a signal
  and its frequency-shifted copies; at shift zero it coincides with the
  Welch spectrum estimate;
* :func:`coherence_estimate` -- normalizes the cyclic spectrum into a
  spectral coherence in [0, 1];
* :func:`periodogram` / :func:`find_resonant_frequencies` -- locate the
  resonant (cyclic) frequencies on a fine zero-padded grid;
* :func:`candidate_shifts_integer` / :func:`candidate_shifts_difference` --
  turn resonant frequencies into candidate shifts, either as integer
  multiples of the fundamental or as all pairwise differences (the latter
  stays aligned when partials deviate from exact harmonicity);
* :func:`coherence_filter` -- keep, per bin, the candidates whose measured
  coherence clears a threshold, capped at ``c_max`` nonzero shifts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.signal

from .dsp import SignalBuffer, StftConfig, modulate, stft


@dataclass(frozen=True)
class CyclicSpectrumEstimate:
    """Averaged cyclic periodogram values, shape ``(n_shifts, n_bins)``.

    ``values[p, k]`` estimates the correlation between the spectrum at bin
    ``k`` and the spectrum at ``f_k - shifts_hz[p]``.  For an auto estimate
    the row at shift zero is the plain Welch PSD (real, nonnegative).
    """

    values: np.ndarray
    shifts_hz: np.ndarray
    bin_freqs_hz: np.ndarray
    n_frames: int

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] != len(self.shifts_hz) or v.shape[1] != len(self.bin_freqs_hz):
            raise ValueError(
                f"values shape {v.shape} inconsistent with {len(self.shifts_hz)} shifts "
                f"and {len(self.bin_freqs_hz)} bins"
            )


def acp_estimate(
    y_stft: np.ndarray,
    x_shift_stfts: np.ndarray,
    shifts_hz: np.ndarray,
    bin_freqs_hz: np.ndarray,
) -> CyclicSpectrumEstimate:
    """Time-averaged cyclic periodogram between ``y`` and shifted copies of ``x``.

    Parameters
    ----------
    y_stft : (n_bins, n_frames) complex
        STFT of the unshifted reference signal.
    x_shift_stfts : (n_shifts, n_bins, n_frames) complex
        STFTs of the input modulated by ``+shifts_hz[p]``, so that bin ``k``
        of row ``p`` holds the input spectrum at ``f_k - shifts_hz[p]``.
    """
    y = np.asarray(y_stft)
    xs = np.asarray(x_shift_stfts)
    if y.ndim != 2:
        raise ValueError(f"y_stft must be (n_bins, n_frames), got shape {y.shape}")
    if xs.ndim != 3 or xs.shape[1:] != y.shape:
        raise ValueError(f"x_shift_stfts shape {xs.shape} does not match y_stft {y.shape}")
    if xs.shape[0] != len(shifts_hz):
        raise ValueError(f"{xs.shape[0]} shifted STFTs for {len(shifts_hz)} shifts")
    values = np.mean(y[np.newaxis] * np.conj(xs), axis=-1)
    return CyclicSpectrumEstimate(
        values=values,
        shifts_hz=np.asarray(shifts_hz, dtype=float),
        bin_freqs_hz=np.asarray(bin_freqs_hz, dtype=float),
        n_frames=y.shape[1],
    )


def coherence_estimate(
    cyclic_spectrum: CyclicSpectrumEstimate,
    y_psd: np.ndarray,
    x_shifted_psds: np.ndarray,
    psd_floor_ratio: float = 1000.0,
) -> np.ndarray:
    """Spectral coherence ``|S_yx|^2 / (S_y * S_x_shifted)`` clipped to [0, 1].

    Each PSD is floored at ``max(PSD) / psd_floor_ratio`` before dividing, so
    that near-empty bins cannot blow up the ratio.  An all-zero PSD yields
    zero coherence rather than a division error.
    """
    if not psd_floor_ratio > 1.0:
        raise ValueError(f"psd_floor_ratio must exceed 1, got {psd_floor_ratio}")
    y_psd = np.asarray(y_psd, dtype=float)
    x_psds = np.atleast_2d(np.asarray(x_shifted_psds, dtype=float))
    num = np.abs(cyclic_spectrum.values) ** 2
    if num.shape != (x_psds.shape[0], y_psd.shape[0]):
        raise ValueError(
            f"cyclic spectrum shape {num.shape} does not match PSDs "
            f"({x_psds.shape[0]} shifts, {y_psd.shape[0]} bins)"
        )
    y_floored = np.maximum(y_psd, np.max(y_psd) / psd_floor_ratio)
    x_floored = np.maximum(x_psds, np.max(x_psds, axis=1, keepdims=True) / psd_floor_ratio)
    denom = y_floored[np.newaxis, :] * x_floored
    gamma = np.zeros_like(num)
    np.divide(num, denom, out=gamma, where=denom > 0.0)
    return np.clip(gamma, 0.0, 1.0)


def cyclic_coherence(
    x: SignalBuffer,
    shifts_hz: np.ndarray,
    cfg: StftConfig,
    psd_floor_ratio: float = 1000.0,
    channel: int = 0,
) -> tuple[np.ndarray, CyclicSpectrumEstimate]:
    """Coherence of one channel with its own frequency-shifted copies.

    Convenience wrapper chaining modulate -> stft -> acp -> coherence for
    every requested shift.  Returns ``(gamma, acp)`` with ``gamma`` of shape
    ``(n_shifts, n_bins)``.
    """
    mono = SignalBuffer(x.samples[channel : channel + 1], x.sample_rate_hz)
    y_tensor = stft(mono, cfg)
    y = y_tensor.channel(0)
    y_psd = np.mean(np.abs(y) ** 2, axis=-1)

    shifts = np.asarray(shifts_hz, dtype=float)
    xs = np.empty((len(shifts), cfg.fft_size, y.shape[1]), dtype=complex)
    x_psds = np.empty((len(shifts), cfg.fft_size))
    for p, shift in enumerate(shifts):
        if shift == 0.0:
            xs[p] = y
        else:
            xs[p] = stft(modulate(mono, shift), cfg).channel(0)
        x_psds[p] = np.mean(np.abs(xs[p]) ** 2, axis=-1)
    acp = acp_estimate(y, xs, shifts, y_tensor.bin_freqs_hz())
    gamma = coherence_estimate(acp, y_psd, x_psds, psd_floor_ratio)
    return gamma, acp


@dataclass(frozen=True)
class PeakParams:
    """Constraints for resonant-frequency peak picking."""

    fft_size: int = 2**17
    f_min_hz: float = 20.0
    f_max_hz: float = 2500.0
    min_distance_hz: float = 20.0
    max_peak_ratio: float = 1e4
    max_peaks: int = 20

    def __post_init__(self):
        if self.fft_size < 2:
            raise ValueError(f"fft_size must be >= 2, got {self.fft_size}")
        if not 0 <= self.f_min_hz < self.f_max_hz:
            raise ValueError(f"need 0 <= f_min < f_max, got [{self.f_min_hz}, {self.f_max_hz}]")
        if self.min_distance_hz <= 0 or self.max_peak_ratio < 1 or self.max_peaks < 1:
            raise ValueError("min_distance_hz, max_peak_ratio and max_peaks must be positive")


@dataclass(frozen=True)
class ResonantFrequencySet:
    """Detected resonant frequencies, sorted ascending.

    ``grid_hz`` is the spacing of the periodogram grid the peaks were read
    from; it doubles as the merge tolerance for pairwise-difference shift
    candidates.
    """

    freqs_hz: np.ndarray
    peak_amplitudes: np.ndarray
    detection_params: PeakParams
    grid_hz: float = field(default=0.0)

    def __post_init__(self):
        f = np.asarray(self.freqs_hz, dtype=float)
        a = np.asarray(self.peak_amplitudes, dtype=float)
        if f.shape != a.shape:
            raise ValueError("freqs and amplitudes must have matching length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("freqs_hz must be strictly ascending")
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "peak_amplitudes", a)

    def __len__(self) -> int:
        return len(self.freqs_hz)


def periodogram(x: SignalBuffer, fft_size: int, channel: int = 0) -> np.ndarray:
    """Zero-padded rectangular-window periodogram ``|DFT(x)|^2``.

    ``fft_size`` must be at least the signal length; the grid spacing is
    ``fs / fft_size``.  Real inputs return the one-sided spectrum of length
    ``fft_size // 2 + 1``; complex inputs the full grid.
    """
    sig = x.channel(channel)
    if fft_size < len(sig):
        raise ValueError(f"fft_size {fft_size} smaller than signal length {len(sig)}")
    if np.iscomplexobj(sig):
        spec = np.fft.fft(sig, n=fft_size)
    else:
        spec = np.fft.rfft(sig, n=fft_size)
    return np.abs(spec) ** 2


def find_resonant_frequencies(
    spectrum: np.ndarray, sample_rate_hz: float, params: PeakParams
) -> ResonantFrequencySet:
    """Pick resonant-frequency peaks from a periodogram.

    Local maxima inside ``[f_min, f_max]`` are kept subject to a minimum
    spacing (smaller peaks suppressed first), discarding any peak below
    ``max(spectrum) / max_peak_ratio``; the ``max_peaks`` largest survivors
    are returned sorted by frequency.  An empty set is a valid outcome and
    callers fall back to plain spatial beamforming.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    grid = sample_rate_hz / params.fft_size
    lo = int(np.ceil(params.f_min_hz / grid))
    hi = min(int(np.floor(params.f_max_hz / grid)), len(spectrum) - 1)
    empty = ResonantFrequencySet(
        np.empty(0), np.empty(0), detection_params=params, grid_hz=grid
    )
    if hi - lo < 2:
        return empty
    band = spectrum[lo : hi + 1]
    height = np.max(spectrum) / params.max_peak_ratio
    peaks, props = scipy.signal.find_peaks(
        band, height=height, distance=params.min_distance_hz / grid
    )
    if len(peaks) == 0:
        return empty
    amps = props["peak_heights"]
    if len(peaks) > params.max_peaks:
        keep = np.sort(np.argsort(amps, kind="stable")[::-1][: params.max_peaks])
        peaks, amps = peaks[keep], amps[keep]
    return ResonantFrequencySet(
        freqs_hz=(peaks + lo) * grid,
        peak_amplitudes=amps,
        detection_params=params,
        grid_hz=grid,
    )


def candidate_shifts_integer(alpha1_hz: float, n_multiples: int = 20) -> np.ndarray:
    """Downward shifts at integer multiples of the fundamental: ``{-r * alpha1}``.

    At a bin sitting on partial ``q``, the shift ``-r * alpha1`` reads the
    spectrum at partial ``q + r`` under an ideally harmonic model.
    """
    if alpha1_hz <= 0:
        raise ValueError(f"fundamental must be positive, got {alpha1_hz}")
    if n_multiples < 1:
        raise ValueError(f"n_multiples must be >= 1, got {n_multiples}")
    return -alpha1_hz * np.arange(n_multiples, dtype=float)


def candidate_shifts_difference(
    freqs, merge_tol_hz: float | None = None
) -> np.ndarray:
    """All pairwise differences of the resonant frequencies, sorted ascending.

    Accepts a :class:`ResonantFrequencySet` or a plain frequency array.  Near
    duplicates (within ``merge_tol_hz``, defaulting to the detection grid
    spacing) are merged to their cluster mean; the set always contains an
    exact zero and is closed under negation.  Unlike the integer-multiple
    rule, differences track the true partial spacing even when the partials
    deviate from exact integer multiples of the fundamental.
    """
    if isinstance(freqs, ResonantFrequencySet):
        if merge_tol_hz is None:
            merge_tol_hz = freqs.grid_hz
        freqs = freqs.freqs_hz
    freqs = np.asarray(freqs, dtype=float)
    tol = float(merge_tol_hz) if merge_tol_hz is not None else 0.0
    if freqs.size == 0:
        return np.zeros(1)
    diffs = np.sort((freqs[:, np.newaxis] - freqs[np.newaxis, :]).ravel())
    merged = []
    start = 0
    for i in range(1, len(diffs) + 1):
        if i == len(diffs) or diffs[i] - diffs[i - 1] > tol:
            merged.append(np.mean(diffs[start:i]))
            start = i
    out = np.asarray(merged)
    out[np.abs(out) <= max(tol, 1e-12)] = 0.0  # the null shift must be exact
    out = np.unique(out)  # snapping can collapse several clusters onto zero
    if not np.any(out == 0.0):
        out = np.sort(np.append(out, 0.0))
    return out


@dataclass(frozen=True)
class ModulationSet:
    """Frequency shifts selected for one STFT bin, null shift first."""

    bin_index: int
    shifts_hz: np.ndarray
    coherences: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.shifts_hz, dtype=float)
        c = np.asarray(self.coherences, dtype=float)
        if s.size < 1 or s[0] != 0.0:
            raise ValueError("shifts_hz must start with the null shift 0")
        if s.shape != c.shape:
            raise ValueError("shifts and coherences must have matching length")
        object.__setattr__(self, "shifts_hz", s)
        object.__setattr__(self, "coherences", c)

    def __len__(self) -> int:
        return len(self.shifts_hz)


def coherence_filter(
    candidates_hz: np.ndarray,
    x: SignalBuffer,
    cfg: StftConfig,
    gamma_min: float = 0.6,
    c_max: int = 8,
    psd_floor_ratio: float = 1000.0,
    channel: int = 0,
) -> list[ModulationSet]:
    """Select, per STFT bin, the candidate shifts with measured coherence.

    For every candidate the coherence with the reference channel is
    estimated; a bin keeps the candidates with coherence at least
    ``gamma_min``, truncated to the ``c_max`` most coherent ones.  The null
    shift is always retained in the first slot on top of that budget, so a
    set has at most ``c_max + 1`` entries.  A bin where nothing qualifies
    collapses to the plain unshifted set ``{0}``.
    """
    candidates = np.asarray(candidates_hz, dtype=float)
    if not np.any(candidates == 0.0):
        raise ValueError("candidate set must include the null shift 0")
    if c_max < 1:
        raise ValueError(f"c_max must be >= 1, got {c_max}")
    if not 0.0 <= gamma_min <= 1.0:
        raise ValueError(f"gamma_min must be in [0, 1], got {gamma_min}")

    gamma, _ = cyclic_coherence(x, candidates, cfg, psd_floor_ratio, channel)
    zero_idx = int(np.flatnonzero(candidates == 0.0)[0])
    nonzero = np.flatnonzero(candidates != 0.0)

    sets = []
    for k in range(cfg.fft_size):
        elig = nonzero[gamma[nonzero, k] >= gamma_min]
        if len(elig) > 0:
            order = np.argsort(-gamma[elig, k], kind="stable")
            elig = elig[order][:c_max]
        sets.append(
            ModulationSet(
                bin_index=k,
                shifts_hz=np.concatenate(([0.0], candidates[elig])),
                coherences=np.concatenate(([gamma[zero_idx, k]], gamma[elig, k])),
            )
        )
    return sets
