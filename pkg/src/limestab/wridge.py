"""Weighted ridge regression with exact closed-form coefficient inference.

For response y, design Z (n x p), positive weights w, and penalty lam >= 0,
the estimator solved here is

    beta_hat = (Z'WZ + lam*I)^-1 Z'W y        (W = diag(w), intercept via
                                               weighted centering, never
                                               penalized)

whose sampling covariance, conditional on the design, is

    sigma^2 * A (Z'WZ) A'    with    A = (Z'WZ + lam*I)^-1.

sigma^2 is estimated from the residuals of the UNPENALIZED weighted fit:
penalized residuals must never be used for it, because any coefficient
vector other than the least-squares one inflates the weighted residual sum
and the estimate would no longer be the unbiased one the intervals assume.
Setting lam = 0 recovers generalized least squares inference; additionally
setting w = 1 recovers classical ordinary least squares inference.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

# Two-sided 95% normal quantile, fixed by reporting convention.
Z_95 = 1.96

COND_WARN = 1e10
COND_ERROR = 1e14


class NumericError(RuntimeError):
    """A linear system was too ill-conditioned to trust its solution."""


class ConditioningWarning(RuntimeWarning):
    """The normal-equations matrix is ill-conditioned; results may be noisy."""


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError(f"interval bounds must be finite: [{self.lower}, {self.upper}]")
        if self.lower > self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class RidgeFit:
    """Result of a weighted ridge solve.

    fit_weighted_ridge fills only the coefficient fields; the inference
    fields (covariance, sigma2_hat, residuals_linear) stay None until
    weighted_ridge_inference computes the full picture. residuals_linear
    always come from the unpenalized weighted fit. pinv_fallback flags that
    the unpenalized system was singular and a pseudo-inverse solution was
    used for the variance estimate.
    """

    beta_hat: np.ndarray
    intercept: float
    covariance: np.ndarray | None = None
    sigma2_hat: float | None = None
    residuals_linear: np.ndarray | None = None
    condition_number: float = float("nan")
    pinv_fallback: bool = False

    def __post_init__(self) -> None:
        beta = np.ascontiguousarray(self.beta_hat, dtype=np.float64)
        beta.setflags(write=False)
        object.__setattr__(self, "beta_hat", beta)
        if self.covariance is not None:
            cov = np.ascontiguousarray(self.covariance, dtype=np.float64)
            if cov.shape != (beta.size, beta.size):
                raise ValueError(f"covariance shape {cov.shape} does not match p={beta.size}")
            if np.abs(cov - cov.T).max(initial=0.0) > 1e-10:
                raise ValueError("covariance must be symmetric to 1e-10")
            if (np.diag(cov) < 0).any():
                raise ValueError("covariance diagonal must be >= 0")
            cov.setflags(write=False)
            object.__setattr__(self, "covariance", cov)
        if self.sigma2_hat is not None and self.sigma2_hat < 0:
            raise ValueError(f"sigma2_hat must be >= 0, got {self.sigma2_hat}")
        if self.residuals_linear is not None:
            res = np.ascontiguousarray(self.residuals_linear, dtype=np.float64)
            res.setflags(write=False)
            object.__setattr__(self, "residuals_linear", res)


def _check_inputs(Zp: np.ndarray, y: np.ndarray | None, w: np.ndarray) -> tuple[int, int]:
    if Zp.ndim != 2:
        raise ValueError(f"design must be 2-D, got ndim={Zp.ndim}")
    n, p = Zp.shape
    if y is not None and y.shape != (n,):
        raise ValueError(f"response length {y.shape} does not match {n} rows")
    if w.shape != (n,):
        raise ValueError(f"weights length {w.shape} does not match {n} rows")
    if not (w > 0).all():
        raise ValueError("weights must all be positive")
    if n <= p:
        raise ValueError(f"need n > p for inference, got n={n}, p={p}")
    return n, p


def _weighted_center(
    Zp: np.ndarray, y: np.ndarray, w: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    w_sum = w.sum()
    z_means = (w @ Zp) / w_sum
    y_mean = float((w @ y) / w_sum)
    return Zp - z_means, y - y_mean, z_means, y_mean


def _gram(Zc: np.ndarray, w: np.ndarray) -> np.ndarray:
    return Zc.T @ (Zc * w[:, None])


def _solve_spd(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    return linalg.cho_solve(linalg.cho_factor(M, lower=True), rhs)


def _guard_conditioning(M: np.ndarray, lam: float) -> float:
    cond = float(np.linalg.cond(M))
    if lam == 0.0 and (not math.isfinite(cond) or cond > COND_ERROR):
        raise NumericError(
            f"weighted ridge: normal equations have condition number {cond:.3e} "
            f"at zero penalty (limit {COND_ERROR:.0e}); columns are collinear"
        )
    if not math.isfinite(cond) or cond > COND_WARN:
        warnings.warn(
            f"normal equations condition number {cond:.3e} exceeds {COND_WARN:.0e}; "
            "coefficient variances may be inaccurate",
            ConditioningWarning,
            stacklevel=3,
        )
    return cond


def fit_weighted_ridge(
    Zp: np.ndarray, y: np.ndarray, w: np.ndarray, lam: float
) -> RidgeFit:
    """Solve for the coefficients and intercept only (no inference fields).

    Raises NumericError when lam = 0 and the weighted gram matrix is
    singular or conditioned worse than 1e14.
    """
    Zp = np.asarray(Zp, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    _check_inputs(Zp, y, w)
    if not (math.isfinite(lam) and lam >= 0):
        raise ValueError(f"penalty must be finite and >= 0, got {lam}")
    zc, yc, z_means, y_mean = _weighted_center(Zp, y, w)
    gram = _gram(zc, w)
    M = gram + lam * np.eye(gram.shape[0])
    cond = _guard_conditioning(M, lam)
    try:
        beta = _solve_spd(M, zc.T @ (w * yc))
    except linalg.LinAlgError as exc:
        raise NumericError(
            f"weighted ridge: normal equations not positive definite "
            f"(condition number {cond:.3e}, penalty {lam})"
        ) from exc
    intercept = y_mean - float(z_means @ beta)
    return RidgeFit(beta_hat=beta, intercept=intercept, condition_number=cond)


def _linear_fit(
    zc: np.ndarray, yc: np.ndarray, w: np.ndarray, gram: np.ndarray
) -> tuple[np.ndarray, bool]:
    # Unpenalized solve used only for the variance estimate; a singular gram
    # falls back to the pseudo-inverse instead of failing outright. The
    # conditioning check runs up front because a Cholesky of a singular
    # matrix only fails when rounding happens to drive a pivot nonpositive.
    rhs = zc.T @ (w * yc)
    cond = float(np.linalg.cond(gram))
    if math.isfinite(cond) and cond <= COND_ERROR:
        try:
            return _solve_spd(gram, rhs), False
        except linalg.LinAlgError:
            pass
    warnings.warn(
        "unpenalized weighted fit is singular; using pseudo-inverse "
        "residuals for the variance estimate",
        ConditioningWarning,
        stacklevel=3,
    )
    return np.linalg.pinv(gram, hermitian=True) @ rhs, True


def residual_variance(Zp: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    """Estimate the noise variance from the unpenalized weighted fit.

    Returns (E' W E) / (n - p) where E are the residuals of weighted linear
    regression with an intercept. A singular design degrades to the
    pseudo-inverse solution and emits a ConditioningWarning.
    """
    Zp = np.asarray(Zp, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, p = _check_inputs(Zp, y, w)
    zc, yc, _, _ = _weighted_center(Zp, y, w)
    beta, _ = _linear_fit(zc, yc, w, _gram(zc, w))
    residuals = yc - zc @ beta
    return float((w @ np.square(residuals)) / (n - p))


def coefficient_covariance(
    Zp: np.ndarray, w: np.ndarray, lam: float, sigma2_hat: float
) -> np.ndarray:
    """Covariance of the weighted ridge coefficients, conditional on the design.

    Computes sigma2_hat * A G A' with G = Z'WZ and A = (G + lam*I)^-1; the
    explicit inverse A is formed because the formula needs it on both sides.
    The result is symmetrized before returning.
    """
    Zp = np.asarray(Zp, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    _check_inputs(Zp, None, w)
    if not (math.isfinite(lam) and lam >= 0):
        raise ValueError(f"penalty must be finite and >= 0, got {lam}")
    if sigma2_hat < 0:
        raise NumericError(f"negative variance estimate: {sigma2_hat}")
    gram = _gram(Zp, w)
    M = gram + lam * np.eye(gram.shape[0])
    _guard_conditioning(M, lam)
    try:
        A = _solve_spd(M, np.eye(gram.shape[0]))
    except linalg.LinAlgError as exc:
        raise NumericError(
            f"covariance: normal equations not positive definite at penalty {lam}"
        ) from exc
    cov = sigma2_hat * (A @ gram @ A.T)
    return (cov + cov.T) / 2.0


def conf_int(coef: float, variance: float) -> ConfidenceInterval:
    """Two-sided 95% interval, coef +/- 1.96 * sqrt(variance)."""
    if variance < 0:
        raise NumericError(f"negative coefficient variance: {variance}")
    half = Z_95 * math.sqrt(variance)
    return ConfidenceInterval(lower=coef - half, upper=coef + half)


def weighted_ridge_inference(
    Zp: np.ndarray, y: np.ndarray, w: np.ndarray, lam: float
) -> RidgeFit:
    """Full fit: coefficients, intercept, covariance, and variance estimate.

    One weighted centering pass feeds the ridge solve, the unpenalized solve
    behind sigma2_hat, and the covariance, so all three see the same data.
    """
    Zp = np.asarray(Zp, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n, p = _check_inputs(Zp, y, w)
    if not (math.isfinite(lam) and lam >= 0):
        raise ValueError(f"penalty must be finite and >= 0, got {lam}")
    zc, yc, z_means, y_mean = _weighted_center(Zp, y, w)
    gram = _gram(zc, w)
    M = gram + lam * np.eye(p)
    cond = _guard_conditioning(M, lam)
    try:
        cf = linalg.cho_factor(M, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericError(
            f"weighted ridge: normal equations not positive definite "
            f"(condition number {cond:.3e}, penalty {lam})"
        ) from exc
    beta = linalg.cho_solve(cf, zc.T @ (w * yc))
    intercept = y_mean - float(z_means @ beta)

    beta_lin, used_pinv = _linear_fit(zc, yc, w, gram)
    residuals = yc - zc @ beta_lin
    sigma2 = float((w @ np.square(residuals)) / (n - p))

    A = linalg.cho_solve(cf, np.eye(p))
    cov = sigma2 * (A @ gram @ A.T)
    cov = (cov + cov.T) / 2.0
    # Round-off can leave the diagonal a hair below zero; clamp inside the
    # symmetry budget only, anything worse is a real defect upstream.
    diag = np.diag(cov)
    if (diag < -1e-10).any():
        raise NumericError(f"covariance diagonal went negative: min {diag.min():.3e}")
    if (diag < 0).any():
        cov = cov.copy()
        np.fill_diagonal(cov, np.maximum(diag, 0.0))
    return RidgeFit(
        beta_hat=beta,
        intercept=intercept,
        covariance=cov,
        sigma2_hat=sigma2,
        residuals_linear=residuals,
        condition_number=cond,
        pinv_fallback=used_pinv,
    )
