from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from limestab import (
    ConditioningWarning,
    ConfidenceInterval,
    NumericError,
    coefficient_covariance,
    conf_int,
    fit_weighted_ridge,
    residual_variance,
    weighted_ridge_inference,
)


def weighted_center(Z, y, w):
    sw = w.sum()
    return Z - (w @ Z) / sw, y - (w @ y) / sw


def random_problem(seed, n=200, p=4, noise=0.5, weighted=True):
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p))
    beta = rng.uniform(-2, 2, p)
    y = 1.5 + Z @ beta + rng.normal(0, noise, n)
    w = np.exp(-rng.random(n)) if weighted else np.ones(n)
    return Z, y, w, beta


class TestFitWeightedRidge:
    def test_two_point_hand_case(self):
        # Z'Z = 2, so the ridge solution is beta_ols * Z'Z / (Z'Z + lam):
        # with beta_ols = 1 and lam = 1 that is exactly 2/3.
        Z = np.array([[1.0], [-1.0]])
        y = np.array([1.0, -1.0])
        fit = fit_weighted_ridge(Z, y, np.ones(2), 1.0)
        assert fit.beta_hat[0] == pytest.approx(2.0 / 3.0, abs=1e-12)
        assert fit.intercept == pytest.approx(0.0, abs=1e-12)

    def test_zero_penalty_uniform_weights_matches_least_squares(self):
        Z, y, w, _ = random_problem(0, weighted=False)
        fit = fit_weighted_ridge(Z, y, w, 0.0)
        X = np.column_stack([np.ones(len(y)), Z])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        assert fit.intercept == pytest.approx(coef[0], abs=1e-8)
        np.testing.assert_allclose(fit.beta_hat, coef[1:], atol=1e-8)

    def test_huge_penalty_shrinks_to_zero(self):
        Z, y, w, _ = random_problem(1)
        fit = fit_weighted_ridge(Z, y, w, 1e12)
        assert np.abs(fit.beta_hat).max() < 1e-6

    def test_shrinkage_is_monotone_in_penalty(self):
        Z, y, w, _ = random_problem(2)
        lams = [0.0, 0.1, 1.0, 10.0, 100.0, 1e4]
        norms = [
            np.linalg.norm(fit_weighted_ridge(Z, y, w, lam).beta_hat)
            for lam in lams
        ]
        assert all(a >= b - 1e-12 for a, b in zip(norms, norms[1:]))

    def test_exact_linear_data_recovered_at_zero_penalty(self):
        rng = np.random.default_rng(3)
        Z = rng.standard_normal((50, 3))
        beta = np.array([2.0, -1.0, 0.5])
        y = 3.0 + Z @ beta
        fit = fit_weighted_ridge(Z, y, np.exp(-rng.random(50)), 0.0)
        np.testing.assert_allclose(fit.beta_hat, beta, atol=1e-10)
        assert fit.intercept == pytest.approx(3.0, abs=1e-10)

    def test_collinear_columns_at_zero_penalty_raise(self):
        rng = np.random.default_rng(4)
        col = rng.standard_normal(60)
        Z = np.column_stack([col, col])
        with pytest.raises(NumericError, match="condition number"):
            fit_weighted_ridge(Z, col * 2, np.ones(60), 0.0)

    def test_near_collinear_columns_warn(self):
        rng = np.random.default_rng(5)
        col = rng.standard_normal(500)
        Z = np.column_stack([col, col + 1e-6 * rng.standard_normal(500)])
        with pytest.warns(ConditioningWarning):
            fit_weighted_ridge(Z, col, np.ones(500), 0.0)

    def test_rejects_negative_penalty(self):
        Z, y, w, _ = random_problem(6)
        with pytest.raises(ValueError, match="penalty"):
            fit_weighted_ridge(Z, y, w, -1.0)

    def test_rejects_nonpositive_weights(self):
        Z, y, w, _ = random_problem(7)
        w[3] = 0.0
        with pytest.raises(ValueError, match="positive"):
            fit_weighted_ridge(Z, y, w, 1.0)


class TestResidualVariance:
    def test_perfect_fit_gives_zero(self):
        rng = np.random.default_rng(10)
        Z = rng.standard_normal((40, 2))
        y = 1.0 + Z @ np.array([3.0, -1.0])
        assert residual_variance(Z, y, np.ones(40)) == pytest.approx(0.0, abs=1e-18)

    def test_recovers_true_noise_variance_at_scale(self):
        rng = np.random.default_rng(11)
        n = 100_000
        Z = rng.standard_normal((n, 3))
        y = Z @ np.array([1.0, 2.0, -1.5]) + rng.normal(0.0, 2.0, n)
        est = residual_variance(Z, y, np.ones(n))
        assert est == pytest.approx(4.0, rel=0.02)

    def test_penalized_residuals_would_inflate_the_estimate(self):
        # The unpenalized coefficients minimize the weighted residual sum, so
        # plugging in heavily shrunk (lam = 100) coefficients must push the
        # same formula strictly up. Guards against ever wiring the penalized
        # residuals into the estimator.
        rng = np.random.default_rng(12)
        n, p = 500, 4
        Z = rng.standard_normal((n, p))
        y = Z @ np.array([2.0, -1.0, 1.5, 0.5]) + rng.normal(0.0, 1.0, n)
        w = np.exp(-rng.random(n))

        mandated = residual_variance(Z, y, w)
        ridge_fit = fit_weighted_ridge(Z, y, w, 100.0)
        zc, yc = weighted_center(Z, y, w)
        ridge_residuals = yc - zc @ ridge_fit.beta_hat
        from_ridge_residuals = float((w @ ridge_residuals**2) / (n - p))
        assert from_ridge_residuals > mandated

    def test_singular_design_falls_back_with_warning(self):
        rng = np.random.default_rng(13)
        col = rng.standard_normal(50)
        Z = np.column_stack([col, col])
        y = col + rng.normal(0, 0.1, 50)
        with pytest.warns(ConditioningWarning, match="pseudo-inverse"):
            est = residual_variance(Z, y, np.ones(50))
        assert np.isfinite(est) and est >= 0


class TestCoefficientCovariance:
    def test_orthonormal_design_gives_scaled_identity(self):
        rng = np.random.default_rng(20)
        q, _ = np.linalg.qr(rng.standard_normal((60, 4)))
        cov = coefficient_covariance(q, np.ones(60), 0.0, 2.5)
        np.testing.assert_allclose(cov, 2.5 * np.eye(4), atol=1e-10)

    def test_zero_penalty_reduces_to_inverse_gram(self):
        Z, y, w, _ = random_problem(21)
        zc, _ = weighted_center(Z, y, w)
        sigma2 = residual_variance(Z, y, w)
        cov = coefficient_covariance(zc, w, 0.0, sigma2)
        gram = zc.T @ (zc * w[:, None])
        np.testing.assert_allclose(cov, sigma2 * np.linalg.inv(gram), atol=1e-10)

    def test_uniform_weights_reduce_to_plain_ridge_covariance(self):
        Z, y, _, _ = random_problem(22, weighted=False)
        zc, _ = weighted_center(Z, y, np.ones(len(y)))
        sigma2 = 1.7
        lam = 2.5
        cov = coefficient_covariance(zc, np.ones(len(y)), lam, sigma2)
        gram = zc.T @ zc
        A = np.linalg.inv(gram + lam * np.eye(4))
        np.testing.assert_allclose(cov, sigma2 * A @ gram @ A.T, atol=1e-10)

    def test_symmetric_and_positive_semidefinite(self):
        for seed in range(5):
            Z, y, w, _ = random_problem(seed, n=80)
            zc, _ = weighted_center(Z, y, w)
            cov = coefficient_covariance(zc, w, 0.7, 1.3)
            np.testing.assert_allclose(cov, cov.T, atol=1e-12)
            assert np.linalg.eigvalsh(cov).min() >= -1e-10

    def test_negative_sigma2_rejected(self):
        Z, y, w, _ = random_problem(23)
        with pytest.raises(NumericError, match="negative"):
            coefficient_covariance(Z, w, 1.0, -0.5)


class TestConfInt:
    def test_unit_variance_at_zero(self):
        ci = conf_int(0.0, 1.0)
        assert ci.lower == -1.96
        assert ci.upper == 1.96

    def test_zero_variance_degenerates_to_a_point(self):
        ci = conf_int(3.25, 0.0)
        assert ci.lower == ci.upper == 3.25
        assert ci.width == 0.0

    def test_hand_arithmetic(self):
        ci = conf_int(2.5, 0.25)
        assert ci.lower == pytest.approx(1.52, abs=1e-12)
        assert ci.upper == pytest.approx(3.48, abs=1e-12)

    def test_negative_variance_rejected(self):
        with pytest.raises(NumericError, match="negative"):
            conf_int(1.0, -1e-9)

    @given(
        coef=st.floats(-1e6, 1e6),
        variance=st.floats(0.0, 1e6),
    )
    def test_contains_center_and_orders_bounds(self, coef, variance):
        ci = conf_int(coef, variance)
        assert ci.lower <= coef <= ci.upper
        assert ci.contains(coef)

    def test_interval_validation(self):
        with pytest.raises(ValueError, match="exceeds"):
            ConfidenceInterval(lower=2.0, upper=1.0)
        with pytest.raises(ValueError, match="finite"):
            ConfidenceInterval(lower=float("nan"), upper=1.0)


class TestWeightedRidgeInference:
    def test_matches_composition_of_parts(self):
        Z, y, w, _ = random_problem(30)
        lam = 1.3
        fit = weighted_ridge_inference(Z, y, w, lam)
        parts = fit_weighted_ridge(Z, y, w, lam)
        np.testing.assert_allclose(fit.beta_hat, parts.beta_hat, atol=1e-12)
        assert fit.intercept == pytest.approx(parts.intercept, abs=1e-12)
        assert fit.sigma2_hat == pytest.approx(residual_variance(Z, y, w), abs=1e-12)
        zc, _ = weighted_center(Z, y, w)
        np.testing.assert_allclose(
            fit.covariance,
            coefficient_covariance(zc, w, lam, fit.sigma2_hat),
            atol=1e-12,
        )

    def test_sigma2_consistent_with_exposed_residuals(self):
        Z, y, w, _ = random_problem(31)
        fit = weighted_ridge_inference(Z, y, w, 0.5)
        n, p = Z.shape
        recomputed = float((w @ fit.residuals_linear**2) / (n - p))
        assert fit.sigma2_hat == recomputed

    def test_textbook_ols_oracle(self):
        # lam = 0, w = 1: brute-force normal equations on the design with an
        # explicit intercept column. The slope block of s2 * (X'X)^-1 must
        # agree with the covariance from the centered formulation; s2 shares
        # the estimator's n - p divisor (intercept uncounted).
        Z, y, _, _ = random_problem(32, weighted=False)
        n, p = Z.shape
        fit = weighted_ridge_inference(Z, y, np.ones(n), 0.0)
        X = np.column_stack([np.ones(n), Z])
        xtx_inv = np.linalg.inv(X.T @ X)
        coef = xtx_inv @ X.T @ y
        resid = y - X @ coef
        s2 = float(resid @ resid / (n - p))
        np.testing.assert_allclose(fit.beta_hat, coef[1:], atol=1e-8)
        assert fit.intercept == pytest.approx(coef[0], abs=1e-8)
        assert fit.sigma2_hat == pytest.approx(s2, abs=1e-8)
        np.testing.assert_allclose(
            fit.covariance, s2 * xtx_inv[1:, 1:], atol=1e-8
        )

    def test_pinv_fallback_is_flagged(self):
        rng = np.random.default_rng(33)
        col = rng.standard_normal(50)
        Z = np.column_stack([col, col])
        y = col + rng.normal(0, 0.1, 50)
        with pytest.warns(ConditioningWarning):
            fit = weighted_ridge_inference(Z, y, np.ones(50), 2.0)
        assert fit.pinv_fallback

    @given(seed=st.integers(0, 2**32 - 1))
    def test_covariance_diagonal_never_negative(self, seed):
        Z, y, w, _ = random_problem(seed, n=60, p=3)
        fit = weighted_ridge_inference(Z, y, w, 0.9)
        assert (np.diag(fit.covariance) >= 0).all()
