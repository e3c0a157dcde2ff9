"""Spatial-spectral (cyclic) MVDR beamforming.

A conventional MVDR beamformer weights the M microphone channels of one STFT
bin.  The cyclic variant appends frequency-shifted copies of all channels to
that vector, one block of M entries per selected shift, and solves the same
minimum-variance problem on the stacked covariance with the target steering
vector zero-padded across the shifted blocks.  Correlation between a noise
component and its shifted copies then lets the beamformer cancel noise that
a purely spatial filter cannot, while the distortionless constraint only
involves the unshifted block, so the target is untouched.

The single-channel two-band special case has a closed-form solution which is
kept here as an independent oracle for the general solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .cyclospec import ModulationSet
from .dsp import SignalBuffer, StftConfig, StftTensor, modulate, stft


class NumericalError(RuntimeError):
    """Raised when a matrix that must be invertible or PSD is not."""


# ---------------------------------------------------------------------------
# stacked multi-band representation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultibandStack:
    """Per-bin stacked STFT vectors ``[x(f_k); x(f_k - s_1); ...]``.

    ``coeffs`` has shape ``(M * max_blocks, fft_size, n_frames)`` with
    shift-major blocks of M channels; bins with fewer selected shifts leave
    the trailing rows zero and record their active count in ``set_sizes``.
    """

    coeffs: np.ndarray
    mod_sets: list
    n_channels: int
    config: StftConfig
    sample_rate_hz: float
    n_samples: int | None = None
    distinct_shifts_hz: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[2]

    @property
    def n_bins(self) -> int:
        return self.coeffs.shape[1]

    def set_size(self, k: int) -> int:
        return len(self.mod_sets[k])

    def bin_matrix(self, k: int) -> np.ndarray:
        """Active rows for bin ``k``: shape ``(M * C_k, n_frames)``."""
        return self.coeffs[: self.n_channels * self.set_size(k), k, :]


def build_multiband_stack(
    x: SignalBuffer, mod_sets: list, cfg: StftConfig
) -> MultibandStack:
    """Assemble the stacked representation for the given per-bin shift sets.

    One STFT per distinct shift in the union of all sets is computed (the
    null shift reuses the plain STFT), then scattered into per-bin blocks in
    the order the sets list their shifts.
    """
    if len(mod_sets) != cfg.fft_size:
        raise ValueError(f"expected {cfg.fft_size} modulation sets, got {len(mod_sets)}")
    m = x.n_channels
    distinct = sorted({float(s) for ms in mod_sets for s in ms.shifts_hz})
    tensors: dict[float, StftTensor] = {}
    for shift in distinct:
        tensors[shift] = stft(modulate(x, shift), cfg)
    n_frames = tensors[0.0].n_frames if 0.0 in tensors else next(iter(tensors.values())).n_frames
    max_blocks = max(len(ms) for ms in mod_sets)

    coeffs = np.zeros((m * max_blocks, cfg.fft_size, n_frames), dtype=complex)
    for k, ms in enumerate(mod_sets):
        for c, shift in enumerate(ms.shifts_hz):
            coeffs[c * m : (c + 1) * m, k, :] = tensors[float(shift)].coeffs[:, k, :]
    return MultibandStack(
        coeffs=coeffs,
        mod_sets=list(mod_sets),
        n_channels=m,
        config=cfg,
        sample_rate_hz=x.sample_rate_hz,
        n_samples=x.n_samples,
        distinct_shifts_hz=np.asarray(distinct),
    )


def trivial_mod_sets(cfg: StftConfig) -> list:
    """Null-shift-only sets for every bin (reduces the stack to a plain STFT)."""
    return [
        ModulationSet(bin_index=k, shifts_hz=np.zeros(1), coherences=np.ones(1))
        for k in range(cfg.fft_size)
    ]


# ---------------------------------------------------------------------------
# covariance estimation
# ---------------------------------------------------------------------------


@dataclass
class SpatialSpectralCov:
    """Per-bin Hermitian covariance matrices of the stacked vectors."""

    matrices: list
    last_frame: int
    smoothing: float | None = None

    def __getitem__(self, k: int) -> np.ndarray:
        return self.matrices[k]


def estimate_cov_batch(stack: MultibandStack) -> SpatialSpectralCov:
    """Sample covariance ``(1/L) sum_l z z^H`` per bin, symmetrized."""
    mats = []
    for k in range(stack.n_bins):
        z = stack.bin_matrix(k)
        s = z @ z.conj().T / z.shape[1]
        mats.append(0.5 * (s + s.conj().T))
    return SpatialSpectralCov(matrices=mats, last_frame=stack.n_frames - 1)


def estimate_cov_recursive(
    prev: np.ndarray | None, z: np.ndarray, beta: float
) -> np.ndarray:
    """One exponential-smoothing covariance update ``S <- b S + (1-b) z z^H``.

    With no previous state the recursion starts from the identity scaled by
    the incoming frame's mean power, so the first update already yields a
    well-conditioned matrix.
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"smoothing must be in [0, 1), got {beta}")
    z = np.asarray(z).reshape(-1)
    if prev is None:
        prev = np.mean(np.abs(z) ** 2) * np.eye(len(z), dtype=complex)
    outer = np.outer(z, z.conj())
    return beta * np.asarray(prev) + (1.0 - beta) * outer


# ---------------------------------------------------------------------------
# robustness and steering
# ---------------------------------------------------------------------------


def loading_delta(lambda_min: float, lambda_max: float, kappa0: float) -> float:
    """Smallest nonnegative shift bounding the condition number by ``kappa0``."""
    if kappa0 <= 1.0:
        raise ValueError(f"condition cap must exceed 1, got {kappa0}")
    return max(0.0, (lambda_max - kappa0 * lambda_min) / (kappa0 - 1.0))


def diagonal_load(s: np.ndarray, kappa0: float = 1000.0) -> np.ndarray:
    """Add ``delta * I`` so the condition number is at most ``kappa0``.

    Matrices already within the cap are returned unchanged (``delta = 0``).
    Raises :class:`NumericalError` if the matrix has an eigenvalue below
    ``-1e-10 * lambda_max``, which a sample covariance cannot produce.
    """
    s = np.asarray(s)
    eig = np.linalg.eigvalsh(s)
    lmin, lmax = float(eig[0]), float(eig[-1])
    if lmax <= 0.0 and lmin == 0.0:
        return s  # zero matrix: loading cannot help, leave to the solver
    if lmin < -1e-10 * abs(lmax):
        raise NumericalError(f"matrix is not PSD (eigenvalues in [{lmin}, {lmax}])")
    delta = loading_delta(lmin, lmax, kappa0)
    if delta == 0.0:
        return s
    return s + delta * np.eye(s.shape[0])


def estimate_rtf_cw(s_x: np.ndarray, s_v: np.ndarray) -> np.ndarray:
    """Covariance-whitening estimate of the target relative transfer function.

    Whitens the (noisy) covariance by the Cholesky factor of the noise
    covariance, takes the principal eigenvector, de-whitens and normalizes
    to the first (reference) channel.  The eigenvector's largest-magnitude
    element is rotated real-positive first so the result is deterministic.
    """
    s_x = np.asarray(s_x)
    s_v = np.asarray(s_v)
    if s_x.shape != s_v.shape or s_x.ndim != 2 or s_x.shape[0] != s_x.shape[1]:
        raise ValueError(f"need matching square matrices, got {s_x.shape} and {s_v.shape}")
    if s_x.shape[0] == 1:
        return np.ones(1, dtype=complex)
    try:
        chol = np.linalg.cholesky(s_v)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("noise covariance is not positive definite") from exc
    inv_chol = scipy.linalg.solve_triangular(chol, np.eye(len(chol)), lower=True)
    whitened = inv_chol @ s_x @ inv_chol.conj().T
    _, vecs = np.linalg.eigh(0.5 * (whitened + whitened.conj().T))
    u = vecs[:, -1]
    pivot = u[np.argmax(np.abs(u))]
    u = u * (np.conj(pivot) / np.abs(pivot))
    a = chol @ u
    if np.abs(a[0]) < 1e-12 * np.linalg.norm(a):
        raise NumericalError("reference element of the estimated RTF vanishes")
    return a / a[0]


# ---------------------------------------------------------------------------
# weight computation and filtering
# ---------------------------------------------------------------------------


def _distortionless_weights(s: np.ndarray, steer: np.ndarray) -> np.ndarray:
    steer = np.asarray(steer, dtype=complex).reshape(-1)
    s = np.asarray(s)
    if s.shape != (len(steer), len(steer)):
        raise ValueError(f"covariance {s.shape} does not match steering length {len(steer)}")
    try:
        factor = scipy.linalg.cho_factor(s, lower=True, check_finite=False)
        b = scipy.linalg.cho_solve(factor, steer, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalError("covariance is singular; apply diagonal loading") from exc
    denom = steer.conj() @ b
    if denom == 0.0 or not np.isfinite(denom):
        raise NumericalError("distortionless constraint is degenerate")
    return b / denom


def mvdr_weights(s: np.ndarray, rtf: np.ndarray) -> np.ndarray:
    """Minimum-variance weights ``S^-1 a / (a^H S^-1 a)`` for one bin."""
    return _distortionless_weights(s, rtf)


def pad_rtf(rtf: np.ndarray, n_blocks: int) -> np.ndarray:
    """Zero-pad an M-channel RTF across ``n_blocks`` shift blocks."""
    rtf = np.asarray(rtf, dtype=complex).reshape(-1)
    out = np.zeros(len(rtf) * n_blocks, dtype=complex)
    out[: len(rtf)] = rtf
    return out


def cmvdr_weights(s_stacked: np.ndarray, rtf_padded: np.ndarray) -> np.ndarray:
    """Cyclic MVDR weights on the stacked covariance.

    Identical solver to :func:`mvdr_weights`; the structure lives in the
    inputs (stacked covariance, zero-padded steering).  With a single block
    this reduces exactly to the spatial MVDR, and with a block-diagonal
    covariance the shifted blocks receive zero weight.
    """
    return _distortionless_weights(s_stacked, rtf_padded)


def apply_beamformer(weights: list, stack: MultibandStack) -> StftTensor:
    """Apply per-bin weights: ``out[k, l] = w_k^H z_k(l)``; single channel."""
    out = np.empty((1, stack.n_bins, stack.n_frames), dtype=complex)
    for k in range(stack.n_bins):
        z = stack.bin_matrix(k)
        w = np.asarray(weights[k]).reshape(-1)
        if len(w) != z.shape[0]:
            raise ValueError(f"bin {k}: weight length {len(w)} != stacked size {z.shape[0]}")
        out[0, k, :] = w.conj() @ z
    return StftTensor(
        coeffs=out,
        config=stack.config,
        sample_rate_hz=stack.sample_rate_hz,
        n_samples=stack.n_samples,
    )


# ---------------------------------------------------------------------------
# closed-form single-channel oracle (one mic, one shifted band)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SingleChannelScenario:
    """Analytic single-mic model at one bin with one shifted copy.

    The unshifted band holds target (power ``sigma_s2``) plus noise
    (``sigma_v2``); the shifted band holds a disjoint target component
    (``sigma_i2``) plus noise correlated with the unshifted noise by ``rho``.
    """

    sigma_s2: float
    sigma_i2: float
    sigma_v2: float
    rho: float

    def __post_init__(self):
        if min(self.sigma_s2, self.sigma_i2, self.sigma_v2) < 0:
            raise ValueError("powers must be nonnegative")
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"correlation must be in [-1, 1], got {self.rho}")

    def noise_cov(self) -> np.ndarray:
        sv, si = self.sigma_v2, self.sigma_i2
        return np.array([[sv, self.rho * sv], [self.rho * sv, si + sv]])

    def full_cov(self) -> np.ndarray:
        return np.diag([self.sigma_s2, 0.0]) + self.noise_cov()


def closed_form_weights(sc: SingleChannelScenario) -> np.ndarray:
    """Optimal weights ``[1, -rho sigma_v2 / (sigma_v2 + sigma_i2)]``.

    The shifted-band weight balances cancelling correlated noise against
    injecting the shifted band's own content; it vanishes when the noise
    decorrelates or the shifted band is swamped by target.
    """
    denom = sc.sigma_v2 + sc.sigma_i2
    if denom == 0.0:
        return np.array([1.0, 0.0])
    return np.array([1.0, -sc.rho * sc.sigma_v2 / denom])


def residual_noise_factor(sc: SingleChannelScenario) -> float:
    """Residual noise power relative to single-band MVDR: ``1 - rho^2 / (1 + sigma_i2/sigma_v2)``.

    Equals 1 (no gain) for uncorrelated noise and drops toward
    ``1 - rho^2`` as the shifted band's target power vanishes.
    """
    if sc.sigma_v2 == 0.0:
        raise ValueError("residual factor undefined for zero noise power")
    return 1.0 - sc.rho**2 / (1.0 + sc.sigma_i2 / sc.sigma_v2)


def residual_noise_power(sc: SingleChannelScenario) -> float:
    """Residual noise ``w^H (S_i + S_v) w`` evaluated with the closed-form weights."""
    w = closed_form_weights(sc)
    return float(np.real(w.conj() @ sc.noise_cov() @ w))
