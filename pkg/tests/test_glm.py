"""Score equation and weighted least squares fitting against oracles."""

import numpy as np
import pytest
from scipy.special import expit

from fglm import (
    ScoreMatrix,
    SolverConfig,
    gamma_population_estimate,
    get_link,
    iwls_fit,
    score_vector,
)
from fglm.errors import NumericError, RankDeficiencyError, SeparationError


def random_problem(rng, n=200, p=3, beta=None, binary=True):
    """Synthetic score matrix and responses with a known coefficient vector."""
    X = np.empty((n, p + 1))
    X[:, 0] = 1.0
    X[:, 1:] = rng.standard_normal((n, p)) / np.arange(1, p + 1)
    if beta is None:
        beta = np.concatenate(([0.3], rng.uniform(-1.0, 1.0, p)))
    eta = X @ beta
    if binary:
        y = (rng.random(n) < expit(eta)).astype(float)
    else:
        y = eta + rng.standard_normal(n)
    return ScoreMatrix(X), y, beta


def bernoulli_loglik(beta, X, y):
    eta = X @ beta
    return float(np.sum(y * eta - np.log1p(np.exp(eta))))


def damped_newton_bernoulli(X, y, tol=1e-12, max_iter=200):
    """Independent maximizer of the Bernoulli log-likelihood."""
    beta = np.zeros(X.shape[1])
    ll = bernoulli_loglik(beta, X, y)
    for _ in range(max_iter):
        mu = expit(X @ beta)
        grad = X.T @ (y - mu)
        hess = (X * (mu * (1 - mu))[:, None]).T @ X
        direction = np.linalg.solve(hess, grad)
        step = 1.0
        for _ in range(50):
            cand = beta + step * direction
            if bernoulli_loglik(cand, X, y) >= ll - 1e-12:
                break
            step *= 0.5
        beta = beta + step * direction
        ll = bernoulli_loglik(beta, X, y)
        if np.max(np.abs(step * direction)) < tol:
            break
    return beta


class TestScoreVector:
    def test_identity_link_gives_ols_normal_residual(self):
        rng = np.random.default_rng(21)
        scores, y, _ = random_problem(rng, n=50, p=2, binary=False)
        beta = np.array([0.1, -0.2, 0.4])
        u = score_vector(beta, scores, y, get_link("identity"))
        expected = scores.values.T @ (y - scores.values @ beta)
        assert np.allclose(u, expected, atol=1e-12)

    def test_zero_at_perfect_fit(self):
        rng = np.random.default_rng(22)
        scores, _, beta = random_problem(rng, n=40, p=2)
        link = get_link("logit")
        y = np.asarray(link.mean(scores.values @ beta))
        u = score_vector(beta, scores, y, link)
        assert np.max(np.abs(u)) < 1e-12

    def test_matches_finite_difference_gradient(self):
        rng = np.random.default_rng(23)
        scores, y, beta = random_problem(rng, n=120, p=3)
        link = get_link("logit")
        u = score_vector(beta, scores, y, link)
        h = 1e-6
        fd = np.empty_like(beta)
        for k in range(beta.size):
            up, dn = beta.copy(), beta.copy()
            up[k] += h
            dn[k] -= h
            fd[k] = (
                bernoulli_loglik(up, scores.values, y)
                - bernoulli_loglik(dn, scores.values, y)
            ) / (2 * h)
        assert np.max(np.abs(u - fd)) < 1e-6

    def test_nonfinite_rows_named(self):
        scores = ScoreMatrix(np.array([[1.0, 0.0], [1.0, 1e6]]))
        y = np.array([1.0, 2.0])
        with pytest.raises(NumericError, match="row"):
            score_vector(np.array([0.0, 1e300]), scores, y, get_link("log"))


class TestIwlsFit:
    def test_identity_link_equals_ols(self):
        rng = np.random.default_rng(24)
        scores, y, _ = random_problem(rng, n=80, p=3, binary=False)
        fit = iwls_fit(scores, y, get_link("identity"))
        ols, *_ = np.linalg.lstsq(scores.values, y, rcond=None)
        assert fit.converged
        assert np.max(np.abs(fit.beta - ols)) < 1e-10

    def test_logit_matches_newton_oracle(self):
        rng = np.random.default_rng(25)
        link = get_link("logit")
        for _ in range(5):
            scores, y, _ = random_problem(rng, n=300, p=3)
            fit = iwls_fit(scores, y, link)
            oracle = damped_newton_bernoulli(scores.values, y)
            assert fit.converged
            assert np.max(np.abs(fit.beta - oracle)) < 1e-6

    def test_constant_response_gives_mean_intercept(self):
        rng = np.random.default_rng(26)
        X = np.empty((40, 3))
        X[:, 0] = 1.0
        X[:, 1:] = rng.standard_normal((40, 2))
        y = np.full(40, 1.75)
        fit = iwls_fit(ScoreMatrix(X), y, get_link("identity"))
        assert np.max(np.abs(fit.beta[1:])) < 1e-8
        assert fit.beta[0] == pytest.approx(1.75, abs=1e-8)

    def test_score_norm_below_tolerance_at_solution(self):
        rng = np.random.default_rng(27)
        link = get_link("logit")
        scores, y, _ = random_problem(rng, n=150, p=2)
        fit = iwls_fit(scores, y, link)
        u = score_vector(fit.beta, scores, y, link)
        assert np.max(np.abs(u)) <= 1e-8

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(28)
        scores, y, _ = random_problem(rng, n=100, p=3)
        perm = rng.permutation(100)
        link = get_link("logit")
        fit1 = iwls_fit(scores, y, link)
        fit2 = iwls_fit(ScoreMatrix(scores.values[perm].copy()), y[perm], link)
        assert np.max(np.abs(fit1.beta - fit2.beta)) < 1e-10

    def test_column_scaling_equivariance(self):
        rng = np.random.default_rng(29)
        scores, y, _ = random_problem(rng, n=120, p=2)
        link = get_link("logit")
        fit1 = iwls_fit(scores, y, link)
        scaled = scores.values.copy()
        c = 3.7
        scaled[:, 1] *= c
        fit2 = iwls_fit(ScoreMatrix(scaled), y, link)
        assert fit2.beta[1] == pytest.approx(fit1.beta[1] / c, abs=1e-8)
        assert fit2.beta[2] == pytest.approx(fit1.beta[2], abs=1e-8)

    def test_separation_detected(self):
        n = 60
        X = np.empty((n, 2))
        X[:, 0] = 1.0
        X[:, 1] = np.concatenate([-np.ones(n // 2), np.ones(n // 2)])
        y = (X[:, 1] > 0).astype(float)
        with pytest.raises(SeparationError):
            iwls_fit(ScoreMatrix(X), y, get_link("logit"))

    def test_duplicate_column_rank_deficient(self):
        rng = np.random.default_rng(30)
        X = np.empty((50, 3))
        X[:, 0] = 1.0
        X[:, 1] = rng.standard_normal(50)
        X[:, 2] = X[:, 1]
        y = (rng.random(50) < 0.5).astype(float)
        with pytest.raises(RankDeficiencyError):
            iwls_fit(ScoreMatrix(X), y, get_link("logit"))

    def test_iteration_cap_reports_nonconvergence(self):
        rng = np.random.default_rng(31)
        scores, y, _ = random_problem(rng, n=200, p=3, beta=np.array([0.5, 2.0, -1.0, 1.0]))
        fit = iwls_fit(scores, y, get_link("logit"), SolverConfig(max_iter=1))
        assert not fit.converged
        assert fit.iterations == 1

    def test_gamma_matches_weighted_gram(self):
        rng = np.random.default_rng(32)
        scores, y, _ = random_problem(rng, n=90, p=2)
        link = get_link("logit")
        fit = iwls_fit(scores, y, link)
        gp = link.mean_deriv(fit.eta)
        var = link.variance_floored(fit.mu)
        w = gp**2 / var
        expected = (scores.values * w[:, None]).T @ scores.values / 90
        assert np.allclose(fit.gamma_tilde, expected, atol=1e-12)
        eigs = np.linalg.eigvalsh(fit.gamma_tilde)
        assert eigs.min() > -1e-8


class TestGeneratorDesignOracle:
    def test_logit_fit_on_generated_curves_matches_newton(self):
        """Fits on curve-projected scores from the synthetic generator
        agree with the independent likelihood maximizer."""
        from fglm import SimDesign, fourier_basis, generate_sample, project_scores

        ds = generate_sample(SimDesign(n=1000, seed=35), rep=0)
        basis = fourier_basis(3, ds.grid)
        scores = project_scores(ds, basis, 3)
        fit = iwls_fit(scores, ds.responses, get_link("logit"))
        oracle = damped_newton_bernoulli(scores.values, ds.responses)
        assert fit.converged
        assert np.max(np.abs(fit.beta - oracle)) < 1e-6


class TestGammaPopulationEstimate:
    def test_identity_link_is_scaled_gram(self):
        rng = np.random.default_rng(33)
        scores, y, _ = random_problem(rng, n=70, p=3, binary=False)
        link = get_link("identity")
        fit = iwls_fit(scores, y, link)
        gamma = gamma_population_estimate(scores, fit, link)
        assert np.allclose(gamma, scores.values.T @ scores.values / 70, atol=1e-12)

    def test_single_row_rank_one(self):
        X = np.array([[1.0, 2.0, -1.0]])
        scores = ScoreMatrix(X)
        link = get_link("identity")
        # bypass the sample-size guard by building the pieces directly
        from fglm.glm import ModelFit

        fit = ModelFit(
            beta=np.zeros(3),
            gamma_tilde=np.eye(3),
            eta=np.zeros(1),
            mu=np.zeros(1),
            converged=True,
            iterations=0,
            deviance=0.0,
        )
        gamma = gamma_population_estimate(scores, fit, link)
        assert np.linalg.matrix_rank(gamma) == 1

    def test_symmetric_on_random_inputs(self):
        rng = np.random.default_rng(34)
        scores, y, _ = random_problem(rng, n=60, p=4)
        link = get_link("logit")
        fit = iwls_fit(scores, y, link)
        gamma = gamma_population_estimate(scores, fit, link)
        assert np.max(np.abs(gamma - gamma.T)) < 1e-12
