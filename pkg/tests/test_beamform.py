"""Beamformer math: solver correctness, reductions, and the analytic oracle."""

import numpy as np
import pytest

from cyclicbf import beamform
from cyclicbf.beamform import (
    MultibandStack,
    NumericalError,
    SingleChannelScenario,
    apply_beamformer,
    build_multiband_stack,
    closed_form_weights,
    cmvdr_weights,
    diagonal_load,
    estimate_cov_batch,
    estimate_cov_recursive,
    estimate_rtf_cw,
    loading_delta,
    mvdr_weights,
    pad_rtf,
    residual_noise_factor,
    residual_noise_power,
    trivial_mod_sets,
)
from cyclicbf.dsp import SignalBuffer, StftConfig, stft


def random_pd(rng, n, load=0.05):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + load * np.eye(n)


def random_rtf(rng, m):
    a = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return a / a[0]


# ---------------------------------------------------------------------------
# closed-form single-channel oracle
# ---------------------------------------------------------------------------


class TestClosedForm:
    def test_frozen_example(self):
        # rho = 0.8, equal shifted-band interference and noise power:
        # shifted weight -0.8 * 1 / (1 + 1) = -0.4, residual 1 - 0.64/2.
        sc = SingleChannelScenario(sigma_s2=2.0, sigma_i2=1.0, sigma_v2=1.0, rho=0.8)
        assert np.allclose(closed_form_weights(sc), [1.0, -0.4], atol=1e-15)
        assert residual_noise_factor(sc) == pytest.approx(0.68, abs=1e-15)

    def test_uncorrelated_noise_gives_no_gain(self):
        sc = SingleChannelScenario(sigma_s2=1.0, sigma_i2=0.5, sigma_v2=2.0, rho=0.0)
        assert np.allclose(closed_form_weights(sc), [1.0, 0.0])
        assert residual_noise_factor(sc) == 1.0

    def test_fully_correlated_clean_shifted_band(self):
        # No target leakage in the shifted band and perfect correlation:
        # the correlated part cancels completely.
        sc = SingleChannelScenario(sigma_s2=1.0, sigma_i2=0.0, sigma_v2=3.0, rho=1.0)
        assert residual_noise_factor(sc) == pytest.approx(0.0, abs=1e-15)
        assert residual_noise_power(sc) == pytest.approx(0.0, abs=1e-12)

    def test_residual_power_consistent_with_factor(self, rng):
        # Two independent routes: w^H S_n w versus sigma_v2 * factor.
        for _ in range(100):
            sc = SingleChannelScenario(
                sigma_s2=rng.uniform(0, 4),
                sigma_i2=rng.uniform(0, 4),
                sigma_v2=rng.uniform(0.1, 4),
                rho=rng.uniform(-1, 1),
            )
            assert residual_noise_power(sc) == pytest.approx(
                sc.sigma_v2 * residual_noise_factor(sc), rel=1e-12
            )

    def test_solver_matches_closed_form(self, rng):
        # The general solver on the analytic covariance must land on the
        # hand-derived weights; steering selects the unshifted band only.
        for _ in range(200):
            sc = SingleChannelScenario(
                sigma_s2=rng.uniform(0.01, 5),
                sigma_i2=rng.uniform(0, 5),
                sigma_v2=rng.uniform(0.05, 5),
                rho=rng.uniform(-0.99, 0.99),
            )
            w = cmvdr_weights(sc.full_cov(), np.array([1.0, 0.0]))
            assert np.allclose(w, closed_form_weights(sc), atol=1e-12)

    def test_monotone_in_correlation_and_leakage(self):
        factors = [
            residual_noise_factor(SingleChannelScenario(1, 0.5, 1, r))
            for r in np.linspace(0, 1, 11)
        ]
        assert all(b <= a + 1e-15 for a, b in zip(factors, factors[1:]))
        leaks = [
            residual_noise_factor(SingleChannelScenario(1, s, 1, 0.9))
            for s in np.linspace(0, 10, 11)
        ]
        assert all(b >= a - 1e-15 for a, b in zip(leaks, leaks[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            SingleChannelScenario(1, 1, 1, 1.5)
        with pytest.raises(ValueError):
            SingleChannelScenario(-1, 1, 1, 0.0)
        with pytest.raises(ValueError):
            residual_noise_factor(SingleChannelScenario(1, 1, 0, 0.5))


# ---------------------------------------------------------------------------
# weight solver
# ---------------------------------------------------------------------------


class TestWeights:
    def test_distortionless_constraint(self, rng):
        for _ in range(50):
            n = rng.integers(2, 8)
            s = random_pd(rng, n)
            a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            w = mvdr_weights(s, a)
            assert abs(np.vdot(w, a) - 1.0) < 1e-12

    def test_optimality_against_random_feasible_vectors(self, rng):
        # Any other vector satisfying the constraint must have at least the
        # same output power.
        for _ in range(30):
            n = int(rng.integers(2, 7))
            s = random_pd(rng, n)
            a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            w = mvdr_weights(s, a)
            pw = np.real(np.vdot(w, s @ w))
            for _ in range(20):
                r = rng.standard_normal(n) + 1j * rng.standard_normal(n)
                p = r - a * (np.vdot(a, r) / np.vdot(a, a))
                u = w + p
                assert abs(np.vdot(u, a) - 1.0) < 1e-10
                assert np.real(np.vdot(u, s @ u)) >= pw - 1e-10

    def test_block_diagonal_reduces_to_padded_mvdr(self, rng):
        # With no cross-band correlation the shifted blocks get zero weight
        # and the unshifted block carries plain MVDR.
        for m in (1, 2, 4):
            for c in (2, 3):
                blocks = [random_pd(rng, m) for _ in range(c)]
                s = np.zeros((m * c, m * c), dtype=complex)
                for i, b in enumerate(blocks):
                    s[i * m : (i + 1) * m, i * m : (i + 1) * m] = b
                rtf = random_rtf(rng, m)
                w_full = cmvdr_weights(s, pad_rtf(rtf, c))
                w_ref = np.zeros(m * c, dtype=complex)
                w_ref[:m] = mvdr_weights(blocks[0], rtf)
                assert np.max(np.abs(w_full - w_ref)) < 1e-10

    def test_single_block_is_plain_mvdr(self, rng):
        s = random_pd(rng, 3)
        rtf = random_rtf(rng, 3)
        assert np.allclose(cmvdr_weights(s, pad_rtf(rtf, 1)), mvdr_weights(s, rtf))

    def test_more_blocks_never_raise_residual(self, rng):
        # The single-block solution zero-padded is feasible for the stacked
        # problem, so the stacked minimum can only be lower.
        for _ in range(25):
            m = int(rng.integers(1, 4))
            s3 = random_pd(rng, 3 * m)
            rtf = random_rtf(rng, m)
            res = []
            for c in (1, 2, 3):
                s = s3[: c * m, : c * m]
                w = cmvdr_weights(s, pad_rtf(rtf, c))
                res.append(np.real(np.vdot(w, s @ w)))
            assert res[1] <= res[0] + 1e-10
            assert res[2] <= res[1] + 1e-10

    def test_singular_covariance_raises(self):
        with pytest.raises(NumericalError):
            mvdr_weights(np.zeros((2, 2)), np.array([1.0, 0.0]))

    def test_shape_mismatch_raises(self, rng):
        with pytest.raises(ValueError):
            mvdr_weights(np.eye(3), np.ones(2))


# ---------------------------------------------------------------------------
# diagonal loading
# ---------------------------------------------------------------------------


class TestDiagonalLoading:
    def test_frozen_delta(self):
        # eigenvalues {0, 1000} with cap 1000: delta = 1000/999, and the
        # loaded matrix sits exactly at the cap.
        s = np.diag([1000.0, 0.0])
        loaded = diagonal_load(s, kappa0=1000.0)
        delta = loaded[1, 1]
        assert delta == pytest.approx(1000.0 / 999.0, rel=1e-12)
        eig = np.linalg.eigvalsh(loaded)
        assert eig[-1] / eig[0] == pytest.approx(1000.0, rel=1e-10)

    def test_well_conditioned_matrix_unchanged(self, rng):
        s = random_pd(rng, 4, load=5.0)
        assert diagonal_load(s, 1e6) is s

    def test_loading_delta_formula(self, rng):
        for _ in range(50):
            lmin = rng.uniform(0, 1)
            lmax = lmin + rng.uniform(0, 100)
            kappa = rng.uniform(1.5, 1e4)
            d = loading_delta(lmin, lmax, kappa)
            assert d >= 0.0
            # after loading, the condition number is within the cap
            assert (lmax + d) <= kappa * (lmin + d) * (1 + 1e-12)

    def test_cap_below_one_rejected(self):
        with pytest.raises(ValueError):
            loading_delta(0.0, 1.0, 1.0)

    def test_indefinite_matrix_raises(self):
        with pytest.raises(NumericalError):
            diagonal_load(np.diag([1.0, -0.5]), 1000.0)

    def test_zero_matrix_passthrough(self):
        s = np.zeros((3, 3))
        assert diagonal_load(s, 1000.0) is s


# ---------------------------------------------------------------------------
# RTF estimation
# ---------------------------------------------------------------------------


class TestRtfCovarianceWhitening:
    def test_exact_recovery_from_true_covariances(self, rng):
        # Rank-one target plus noise with known covariances is solved
        # exactly by the whitening construction.
        for _ in range(50):
            m = int(rng.integers(2, 6))
            a = random_rtf(rng, m)
            s_v = random_pd(rng, m, load=0.5)
            s_x = 3.0 * np.outer(a, a.conj()) + s_v
            est = estimate_rtf_cw(s_x, s_v)
            assert np.max(np.abs(est - a)) < 1e-10

    def test_sample_covariance_recovery_within_five_degrees(self, rng):
        m, n_frames = 3, 6000
        a = random_rtf(rng, m)
        chol = np.linalg.cholesky(random_pd(rng, m, load=0.5))
        noise = chol @ (
            rng.standard_normal((m, n_frames)) + 1j * rng.standard_normal((m, n_frames))
        )
        sig = a[:, None] * (
            rng.standard_normal(n_frames) + 1j * rng.standard_normal(n_frames)
        ) * 2.0
        x = sig + noise
        s_x = x @ x.conj().T / n_frames
        s_v = noise @ noise.conj().T / n_frames
        est = estimate_rtf_cw(s_x, s_v)
        cosang = np.abs(np.vdot(est, a)) / (np.linalg.norm(est) * np.linalg.norm(a))
        assert np.degrees(np.arccos(min(cosang, 1.0))) < 5.0

    def test_single_channel_is_unity(self):
        assert estimate_rtf_cw(np.array([[2.0]]), np.array([[1.0]])) == pytest.approx(1.0)

    def test_indefinite_noise_covariance_raises(self):
        with pytest.raises(NumericalError):
            estimate_rtf_cw(np.eye(2), np.diag([1.0, -1.0]))

    def test_shape_mismatch_raises(self):
        with pytest.raises(ValueError):
            estimate_rtf_cw(np.eye(3), np.eye(2))


# ---------------------------------------------------------------------------
# covariance estimation
# ---------------------------------------------------------------------------


class TestCovariance:
    def test_recursive_beta_zero_is_outer_product(self, rng):
        z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        s = estimate_cov_recursive(np.eye(4, dtype=complex), z, 0.0)
        assert np.allclose(s, np.outer(z, z.conj()), atol=1e-14)

    def test_running_mean_via_varying_beta(self, rng):
        # beta_l = (l-1)/l turns the recursion into the arithmetic mean,
        # which must agree with the batch estimate.
        frames = rng.standard_normal((5, 40)) + 1j * rng.standard_normal((5, 40))
        s = None
        for l in range(frames.shape[1]):
            s = estimate_cov_recursive(s, frames[:, l], l / (l + 1.0))
        batch = frames @ frames.conj().T / frames.shape[1]
        assert np.max(np.abs(s - batch)) < 1e-12

    def test_geometric_convergence_on_constant_frame(self, rng):
        z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        target = np.outer(z, z.conj())
        beta = 0.9
        s = np.eye(3, dtype=complex) * 10.0
        err0 = np.linalg.norm(s - target)
        for n in range(1, 60):
            s = estimate_cov_recursive(s, z, beta)
            assert np.linalg.norm(s - target) <= beta**n * err0 * (1 + 1e-10)

    def test_recursive_seeds_from_frame_power(self, rng):
        z = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        s = estimate_cov_recursive(None, z, 0.95)
        expect = 0.95 * np.mean(np.abs(z) ** 2) * np.eye(4) + 0.05 * np.outer(z, z.conj())
        assert np.allclose(s, expect, atol=1e-13)

    def test_invalid_smoothing_rejected(self, rng):
        z = np.ones(2, dtype=complex)
        for bad in (1.0, -0.1, 2.0):
            with pytest.raises(ValueError):
                estimate_cov_recursive(None, z, bad)

    def test_batch_covariance_is_hermitian_psd(self, rng):
        sig = SignalBuffer(rng.standard_normal((2, 6000)), 16000.0)
        cfg = StftConfig(fft_size=256, hop=64)
        stack = build_multiband_stack(sig, trivial_mod_sets(cfg), cfg)
        cov = estimate_cov_batch(stack)
        for k in (0, 10, 128, 255):
            s = cov[k]
            assert np.allclose(s, s.conj().T)
            assert np.linalg.eigvalsh(s)[0] > -1e-12


# ---------------------------------------------------------------------------
# stacking and application
# ---------------------------------------------------------------------------


class TestMultibandStack:
    def test_trivial_sets_reproduce_plain_stft(self, rng):
        sig = SignalBuffer(rng.standard_normal((2, 4000)), 16000.0)
        cfg = StftConfig(fft_size=256, hop=64)
        stack = build_multiband_stack(sig, trivial_mod_sets(cfg), cfg)
        ref = stft(sig, cfg)
        assert stack.n_channels == 2
        for k in (0, 7, 100):
            assert np.allclose(stack.bin_matrix(k), ref.coeffs[:, k, :])

    def test_reference_channel_passthrough(self, rng):
        # Selecting the first channel with unit weight reproduces its STFT.
        sig = SignalBuffer(rng.standard_normal((2, 4000)), 16000.0)
        cfg = StftConfig(fft_size=256, hop=64)
        stack = build_multiband_stack(sig, trivial_mod_sets(cfg), cfg)
        weights = [np.array([1.0, 0.0]) for _ in range(cfg.fft_size)]
        out = apply_beamformer(weights, stack)
        ref = stft(sig, cfg)
        assert np.allclose(out.coeffs[0], ref.coeffs[0])

    def test_wrong_set_count_rejected(self, rng):
        sig = SignalBuffer(rng.standard_normal((1, 4000)), 16000.0)
        cfg = StftConfig(fft_size=256, hop=64)
        with pytest.raises(ValueError):
            build_multiband_stack(sig, trivial_mod_sets(cfg)[:-1], cfg)

    def test_weight_length_mismatch_rejected(self, rng):
        sig = SignalBuffer(rng.standard_normal((1, 4000)), 16000.0)
        cfg = StftConfig(fft_size=256, hop=64)
        stack = build_multiband_stack(sig, trivial_mod_sets(cfg), cfg)
        weights = [np.ones(1) for _ in range(cfg.fft_size)]
        weights[5] = np.ones(3)
        with pytest.raises(ValueError):
            apply_beamformer(weights, stack)

    def test_pad_rtf_layout(self):
        padded = pad_rtf(np.array([1.0, 2.0]), 3)
        assert np.array_equal(padded, [1.0, 2.0, 0.0, 0.0, 0.0, 0.0])
