"""Quasi-likelihood fitting of the truncated model by iterated weighted
least squares.

The estimating equation sets the weighted score to zero; each iteration
takes a Fisher-scoring step with the current weights, halving the step
whenever the quasi-deviance would increase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import ScoreMatrix
from .errors import NumericError, RankDeficiencyError, SeparationError
from .links import LinkSpec

SEPARATION_NORM = 1e4


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and caps for the weighted least squares iteration."""

    tol: float = 1e-8
    max_iter: int = 100
    max_halvings: int = 20

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1 or self.max_halvings < 0:
            raise ValueError("solver config values out of range")


@dataclass(frozen=True)
class ModelFit:
    """Result of a fitted truncated model.

    beta holds the intercept followed by the slope coefficients;
    gamma_tilde is the empirical weighted score covariance evaluated at
    the fitted coefficients.
    """

    beta: np.ndarray
    gamma_tilde: np.ndarray
    eta: np.ndarray
    mu: np.ndarray
    converged: bool
    iterations: int
    deviance: float
    gamma_source: str = "empirical_known_link"
    trace: tuple = field(default=None, compare=False)

    @property
    def p(self) -> int:
        return self.beta.size - 1

    @property
    def n(self) -> int:
        return self.eta.size


def _check_rows_finite(name: str, *arrays) -> None:
    for arr in arrays:
        bad = ~np.isfinite(arr)
        if np.any(bad):
            row = int(np.nonzero(bad)[0][0])
            raise NumericError(f"non-finite {name} at row {row}")


def _link_terms(beta, X, y, link: LinkSpec):
    eta = X @ beta
    mu = np.asarray(link.mean(eta), dtype=float)
    gp = np.asarray(link.mean_deriv(eta), dtype=float)
    var = link.variance_floored(mu)
    _check_rows_finite("link evaluation", eta, mu, gp, var)
    return eta, mu, gp, var


def _weighted_residual(y, mu, gp, var) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        r = (y - mu) * gp / var
    _check_rows_finite("weighted residual", r)
    return r


def score_vector(beta, scores: ScoreMatrix, y, link: LinkSpec) -> np.ndarray:
    """Weighted score: sum of (y - mu) g'(eta) eps / var(mu) over subjects."""
    X = scores.values
    beta = np.asarray(beta, dtype=float)
    y = np.asarray(y, dtype=float)
    if beta.size != X.shape[1] or y.size != X.shape[0]:
        raise ValueError("score dimensions do not agree")
    eta, mu, gp, var = _link_terms(beta, X, y, link)
    return X.T @ _weighted_residual(y, mu, gp, var)


def _solve_spd(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    eigvals = np.linalg.eigvalsh(A)
    if eigvals[-1] <= 0 or eigvals[0] / eigvals[-1] < 1e-14:
        raise RankDeficiencyError(
            "weighted normal equations are singular "
            f"(eigenvalue range {eigvals[0]:.3e}..{eigvals[-1]:.3e})"
        )
    return np.linalg.solve(A, b)


def iwls_fit(
    scores: ScoreMatrix, y, link: LinkSpec, cfg: SolverConfig = None
) -> ModelFit:
    """Solve the score equation by damped iterated weighted least squares.

    Starts from zero slopes with the intercept set to the inverse mean of
    the response average. Convergence requires both the coefficient change
    and the score norm to fall below the tolerance; hitting the iteration
    cap returns a fit flagged converged=False.
    """
    cfg = cfg or SolverConfig()
    X = scores.values
    y = np.asarray(y, dtype=float)
    n, q = X.shape
    if y.size != n:
        raise ValueError(f"{y.size} responses for {n} score rows")
    if n <= q:
        raise ValueError(f"need n > p+1 (= {q}), got n = {n}")

    ybar = float(np.mean(y))
    if link.binary_mean:
        ybar = min(max(ybar, 1e-3), 1.0 - 1e-3)
    beta = np.zeros(q)
    beta[0] = float(link.inverse(ybar))

    _, mu, _, _ = _link_terms(beta, X, y, link)
    dev = link.deviance(y, mu)
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        eta, mu, gp, var = _link_terms(beta, X, y, link)
        w = gp * gp / var
        U = X.T @ _weighted_residual(y, mu, gp, var)
        A = (X * w[:, None]).T @ X
        try:
            delta = _solve_spd(A, U)
        except RankDeficiencyError:
            # a binary fit whose weights collapsed because every response
            # is matched exactly has run into complete separation
            if link.binary_mean and np.all(np.abs(y - mu) < 1e-4):
                raise SeparationError(
                    "responses are perfectly separated; coefficients diverge"
                ) from None
            raise

        step = 1.0
        for _ in range(cfg.max_halvings + 1):
            candidate = beta + step * delta
            _, mu_c, _, _ = _link_terms(candidate, X, y, link)
            dev_c = link.deviance(y, mu_c)
            if dev_c <= dev or step <= 2.0 ** (-cfg.max_halvings):
                break
            step *= 0.5
        change = float(np.max(np.abs(step * delta)))
        beta = candidate
        dev = dev_c

        if link.binary_mean and np.linalg.norm(beta) > SEPARATION_NORM:
            raise SeparationError(
                "coefficients diverged; the binary responses appear separable"
            )
        score_norm = float(np.max(np.abs(score_vector(beta, scores, y, link))))
        if change <= cfg.tol and score_norm <= cfg.tol:
            converged = True
            break

    eta, mu, gp, var = _link_terms(beta, X, y, link)
    w = gp * gp / var
    gamma_tilde = (X * w[:, None]).T @ X / n
    return ModelFit(
        beta=beta,
        gamma_tilde=0.5 * (gamma_tilde + gamma_tilde.T),
        eta=eta,
        mu=mu,
        converged=converged,
        iterations=iterations,
        deviance=link.deviance(y, mu),
    )


def gamma_population_estimate(
    scores: ScoreMatrix, fit: ModelFit, link: LinkSpec
) -> np.ndarray:
    """Plug-in average of g'(eta)^2/var(mu) times the score outer products.

    Identical to the fit's empirical matrix by construction; exposed so
    estimated link and variance functions can be swapped in.
    """
    X = scores.values
    gp = np.asarray(link.mean_deriv(fit.eta), dtype=float)
    var = link.variance_floored(link.mean(fit.eta))
    w = gp * gp / var
    G = (X * w[:, None]).T @ X / X.shape[0]
    return 0.5 * (G + G.T)
