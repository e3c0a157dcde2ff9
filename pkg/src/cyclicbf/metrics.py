"""Scale-invariant SDR and enhancement improvement scores."""

from __future__ import annotations

import numpy as np

SI_SDR_CAP_DB = 120.0


def si_sdr(estimate: np.ndarray, reference: np.ndarray) -> float:
    """Scale-invariant signal-to-distortion ratio in dB, capped at +120.

    Both signals are mean-removed; the reference is scaled by the projection
    coefficient ``<est, ref> / ||ref||^2`` before measuring distortion, so
    the score ignores gain differences.
    """
    est = np.asarray(estimate, dtype=float).reshape(-1)
    ref = np.asarray(reference, dtype=float).reshape(-1)
    if est.shape != ref.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {ref.shape}")
    est = est - np.mean(est)
    ref = ref - np.mean(ref)
    ref_energy = np.sum(ref**2)
    if ref_energy == 0.0:
        raise ValueError("reference signal is silent")
    alpha = np.dot(est, ref) / ref_energy
    target = alpha * ref
    distortion = np.sum((target - est) ** 2)
    signal = np.sum(target**2)
    if distortion == 0.0:
        return SI_SDR_CAP_DB
    return min(10.0 * np.log10(signal / distortion), SI_SDR_CAP_DB)


def improvement(noisy_ref: np.ndarray, enhanced: np.ndarray, target_ref: np.ndarray) -> float:
    """SI-SDR gain of the enhanced signal over the unprocessed reference mic."""
    return si_sdr(enhanced, target_ref) - si_sdr(noisy_ref, target_ref)
