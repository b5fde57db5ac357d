"""Asymptotic tests, simultaneous confidence bands and the weighted
function-space distance.

The test statistic centers and scales the weighted quadratic form of the
coefficient deviation; its one-sided normal limit drives p-values,
rejection rules and the band radius.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .basis import Basis, Curve
from .domain import FunctionalDataset, quadrature_weights
from .errors import ConditioningError, DataError
from .glm import ModelFit

GAMMA_PSD_TOL = -1e-8
BAND_EIGENVALUE_FLOOR = 1e-10


@dataclass(frozen=True)
class InferenceReport:
    """Test outcome together with the band envelope when one was requested."""

    statistic: float
    p_value: float
    dof_terms: int
    alpha: float
    reject: bool
    gamma_used: str
    band_lower: Curve = None
    band_upper: Curve = None

    def to_json(self) -> str:
        payload = {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "dof_terms": self.dof_terms,
            "alpha": self.alpha,
            "reject": self.reject,
            "gamma_used": self.gamma_used,
        }
        return json.dumps(payload, indent=2)


def _validate_gamma(gamma: np.ndarray, q: int) -> None:
    if gamma.shape != (q, q):
        raise ValueError(f"gamma must be {q} x {q}")
    if np.max(np.abs(gamma - gamma.T)) > 1e-8:
        raise DataError("gamma matrix is not symmetric")
    if np.linalg.eigvalsh(gamma)[0] < GAMMA_PSD_TOL:
        raise DataError("gamma matrix is not positive semidefinite")


def test_statistic(
    beta_hat,
    beta_0,
    gamma: np.ndarray,
    n: int,
    include_intercept: bool = True,
) -> float:
    """Centered, scaled quadratic form of the coefficient deviation.

    With q active terms the statistic is
    (n (bhat-b0)' Gamma (bhat-b0) - q) / sqrt(2 q); when the intercept is
    excluded, the first entry of both vectors and the first row/column of
    gamma are dropped before evaluation.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta_0 = np.asarray(beta_0, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if beta_hat.shape != beta_0.shape:
        raise ValueError("coefficient vectors have different lengths")
    if not include_intercept:
        beta_hat = beta_hat[1:]
        beta_0 = beta_0[1:]
        gamma = gamma[1:, 1:]
    q = beta_hat.size
    if q < 1:
        raise ValueError("no coefficients left to test")
    _validate_gamma(gamma, q)
    delta = beta_hat - beta_0
    quad = float(n * delta @ gamma @ delta)
    return (quad - q) / np.sqrt(2.0 * q)


def no_effect_test(fit: ModelFit, alpha: float = 0.05) -> InferenceReport:
    """Test whether all slope coefficients vanish.

    The intercept is excluded; rejection follows the one-sided rule
    |T| > Phi^{-1}(1 - alpha), and the reported p-value is 1 - Phi(T).
    """
    if not fit.converged:
        raise DataError("fit did not converge; test would be unreliable")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    t = test_statistic(
        fit.beta,
        np.concatenate(([fit.beta[0]], np.zeros(fit.p))),
        fit.gamma_tilde,
        fit.n,
        include_intercept=False,
    )
    critical = float(norm.ppf(1.0 - alpha))
    return InferenceReport(
        statistic=float(t),
        p_value=float(1.0 - norm.cdf(t)),
        dof_terms=fit.p,
        alpha=alpha,
        reject=bool(abs(t) > critical),
        gamma_used=fit.gamma_source,
    )


def band_radius_constant(p: int, n: int, alpha: float) -> float:
    """Quadratic-form threshold (p + 1 + sqrt(2(p+1)) z_{1-alpha}) / n."""
    q = p + 1
    return (q + np.sqrt(2.0 * q) * float(norm.ppf(1.0 - alpha))) / n


def simultaneous_band(
    fit: ModelFit, basis: Basis, alpha: float = 0.05
) -> tuple[Curve, Curve]:
    """Envelope covering the whole coefficient function at joint level 1-alpha.

    The envelope is centered at the fitted function (intercept included,
    paired with the constant function one) with half-width
    sqrt(c(alpha) * sum_k omega_k(t)^2 / lambda_k) from the
    eigendecomposition of the fit's weighted score covariance.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    q = fit.p + 1
    gamma = fit.gamma_tilde
    _validate_gamma(gamma, q)
    eigvals, eigvecs = np.linalg.eigh(gamma)
    if eigvals[0] <= BAND_EIGENVALUE_FLOOR:
        raise ConditioningError(
            f"gamma eigenvalue {eigvals[0]:.3e} too small for a stable band"
        )
    if fit.p > basis.size:
        raise ValueError("fit order exceeds the basis size")

    m = len(basis.grid)
    design = np.empty((m, q))
    design[:, 0] = 1.0
    design[:, 1:] = basis.functions[: fit.p].T
    omega = design @ eigvecs  # omega[:, k] pairs eigenvector k with the functions
    half = np.sqrt(
        band_radius_constant(fit.p, fit.n, alpha) * (omega**2 / eigvals) @ np.ones(q)
    )
    center = design @ fit.beta
    return Curve(center - half), Curve(center + half)


def dg_distance_squared(
    f: tuple[float, Curve], g: tuple[float, Curve], fit: ModelFit, basis: Basis
) -> float:
    """Squared distance between two fitted functions in the weighted metric.

    Both arguments are (intercept, curve) pairs; their difference is
    projected onto the fit's basis directions and measured through the
    fit's empirical weighted score covariance.
    """
    f0, fc = f
    g0, gc = g
    if len(fc) != len(basis.grid) or len(gc) != len(basis.grid):
        raise DataError("curves must live on the basis grid")
    qw = quadrature_weights(basis.grid, basis.weight)
    diff = fc.values - gc.values
    delta = np.empty(fit.p + 1)
    delta[0] = f0 - g0
    delta[1:] = basis.functions[: fit.p] @ (diff * qw)
    return float(delta @ fit.gamma_tilde @ delta)


def generalized_covariance(ds: FunctionalDataset, weights) -> np.ndarray:
    """Weighted sample covariance kernel of curves.

    Each curve is scaled by its subject weight (the derivative-to-scale
    ratio of the fitted link) before averaging the outer products.
    """
    w = np.asarray(weights, dtype=float)
    if w.size != ds.n:
        raise ValueError("one weight per subject required")
    scaled = ds.curve_values * w[:, None]
    G = scaled.T @ scaled / ds.n
    return 0.5 * (G + G.T)


def eigen_score_diagnostic(
    ds: FunctionalDataset, weights, g_basis: Basis
) -> np.ndarray:
    """Cross-moment matrix of weighted scores under an eigenbasis.

    Under the eigenbasis of the generalized covariance operator these
    moments are diagonal with the operator's eigenvalues on the diagonal;
    departures flag miscalibration. Pass a basis estimated from an
    independent sample to make this a genuine out-of-sample check.
    """
    w = np.asarray(weights, dtype=float)
    if w.size != ds.n:
        raise ValueError("one weight per subject required")
    qw = quadrature_weights(g_basis.grid, g_basis.weight)
    raw = (ds.curve_values * qw) @ g_basis.functions.T
    weighted = raw * w[:, None]
    M = weighted.T @ weighted / ds.n
    return 0.5 * (M + M.T)
