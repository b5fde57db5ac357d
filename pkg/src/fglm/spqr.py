"""Semiparametric fitting with unknown link and variance functions.

Alternates kernel smoothing of the link, its derivative and the variance
function against score updates for the direction coefficients, which are
kept on the unit sphere for identifiability. No separate intercept is
fit: location is absorbed by the estimated link.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .basis import ScoreMatrix
from .errors import (
    DataError,
    DegenerateLinkError,
    RankDeficiencyError,
    SmoothingError,
)
from .glm import ModelFit, iwls_fit
from .links import LinkSpec, identity_link, logit_link
from .smoothing import SmootherConfig, local_poly_smooth, rule_of_thumb_bandwidth

EVAL_GRID_SIZE = 201
G_PRIME_FLOOR = 1e-6
VARIANCE_FLOOR = 1e-4
OUTER_TOL = 1e-5
MAX_OUTER = 25
MAX_INNER = 10


@dataclass(frozen=True)
class LinkEstimate:
    """Estimated link, link derivative and variance on a predictor grid.

    Lookups use linear interpolation inside the grid and flat
    extrapolation beyond its ends.
    """

    eval_grid: np.ndarray
    g_hat: np.ndarray
    g_prime_hat: np.ndarray
    sigma2_hat: np.ndarray
    sigma2_floored_count: int = 0

    def __post_init__(self):
        grid = np.asarray(self.eval_grid, dtype=float)
        if np.any(np.diff(grid) <= 0):
            raise DataError("link evaluation grid must be increasing")
        for name in ("g_hat", "g_prime_hat", "sigma2_hat"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != grid.shape or not np.all(np.isfinite(arr)):
                raise DataError(f"{name} must be finite and aligned with the grid")
            object.__setattr__(self, name, arr)
        if np.any(np.diff(self.g_hat) < 0):
            raise DataError("estimated link must be nondecreasing")
        if np.any(self.sigma2_hat < VARIANCE_FLOOR):
            raise DataError("estimated variance fell below the positivity floor")
        object.__setattr__(self, "eval_grid", grid)

    def mean_at(self, eta):
        return np.interp(eta, self.eval_grid, self.g_hat)

    def deriv_at(self, eta):
        return np.interp(eta, self.eval_grid, self.g_prime_hat)

    def variance_at(self, eta):
        return np.interp(eta, self.eval_grid, self.sigma2_hat)

    def inverse_at(self, values):
        """Predictor levels at which the estimated link attains the values.

        Values outside the estimated range clamp to the grid ends.
        """
        strict = self.g_hat + 1e-12 * np.arange(self.g_hat.size)
        clipped = np.clip(values, strict[0], strict[-1])
        return np.interp(clipped, strict, self.eval_grid)


def save_link_estimate(est: LinkEstimate, path) -> None:
    """Write (grid, link, derivative, variance) as four CSV columns."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eta", "g_hat", "g_prime_hat", "sigma2_hat"])
        for row in zip(est.eval_grid, est.g_hat, est.g_prime_hat, est.sigma2_hat):
            writer.writerow([repr(float(v)) for v in row])


def monotone_projection(values: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators projection onto nondecreasing sequences."""
    values = np.asarray(values, dtype=float)
    result = values.copy()
    weight = np.ones_like(result)
    blocks = list(range(result.size))  # rightmost index of each block
    i = 0
    while i < len(blocks) - 1:
        if result[blocks[i]] > result[blocks[i + 1]]:
            total = weight[blocks[i]] + weight[blocks[i + 1]]
            merged = (
                result[blocks[i]] * weight[blocks[i]]
                + result[blocks[i + 1]] * weight[blocks[i + 1]]
            ) / total
            result[blocks[i + 1]] = merged
            weight[blocks[i + 1]] = total
            del blocks[i]
            i = max(i - 1, 0)
        else:
            i += 1
    out = np.empty_like(result)
    start = 0
    for b in blocks:
        out[start : b + 1] = result[b]
        start = b + 1
    return out


def _smooth_link(eta, y, cfg: SmootherConfig, h: float):
    """One smoothing pass: link values and derivative on the fixed grid.

    The derivative is the windowed difference quotient of the monotonized
    link over a bandwidth-wide window, so it is consistent with the
    exported curve and vanishes where the link saturates (a separate
    derivative smoother spikes there on sparse binary data).
    """
    lo, hi = float(np.min(eta)), float(np.max(eta))
    if hi - lo <= 0:
        raise DegenerateLinkError("fitted predictors collapsed to a point")
    grid = np.linspace(lo, hi, EVAL_GRID_SIZE)
    scfg = replace(cfg, bandwidth=h)
    g_raw = local_poly_smooth(eta, y, grid, scfg, deriv=0)
    g_hat = monotone_projection(g_raw)
    if g_hat[-1] - g_hat[0] < 1e-8:
        raise DegenerateLinkError("estimated link collapsed to a constant")
    step = grid[1] - grid[0]
    half = max(1, int(round(h / step)))
    idx = np.arange(EVAL_GRID_SIZE)
    lo_idx = np.maximum(idx - half, 0)
    hi_idx = np.minimum(idx + half, EVAL_GRID_SIZE - 1)
    g_prime = np.maximum(
        (g_hat[hi_idx] - g_hat[lo_idx]) / ((hi_idx - lo_idx) * step), G_PRIME_FLOOR
    )
    return grid, g_hat, g_prime


def _smooth_variance(eta, mu_i, resid2, grid, g_grid, cfg: SmootherConfig, h: float):
    """Variance estimate on the predictor grid from squared residuals.

    Smooths against fitted means; when those are (locally) degenerate the
    predictor axis is used instead and a fallback flag is returned.
    """
    sd_eta = float(np.std(eta))
    sd_mu = float(np.std(mu_i))
    fell_back = sd_mu < 1e-10 * max(sd_eta, 1.0) or np.unique(mu_i).size < cfg.degree + 2
    raw = None
    if not fell_back:
        h_mu = h * sd_mu / sd_eta if sd_eta > 0 else h
        scfg = replace(cfg, bandwidth=max(h_mu, 1e-12))
        try:
            raw = local_poly_smooth(mu_i, resid2, g_grid, scfg, deriv=0)
        except SmoothingError:
            # ties in the fitted means (locally flat link) starve the
            # mean-axis smoother; regress on the predictor axis instead
            fell_back = True
    if raw is None:
        scfg = replace(cfg, bandwidth=h)
        raw = local_poly_smooth(eta, resid2, grid, scfg, deriv=0)
    floored = int(np.sum(raw < VARIANCE_FLOOR))
    return np.maximum(raw, VARIANCE_FLOOR), floored, fell_back


def _inner_score_solve(S, y, b, link_est: LinkEstimate):
    """Damped score iteration for the direction given fixed estimated functions."""
    b = b.copy()
    for _ in range(MAX_INNER):
        eta = S @ b
        resid = (y - link_est.mean_at(eta)) * link_est.deriv_at(eta)
        var = np.maximum(link_est.variance_at(eta), VARIANCE_FLOOR)
        u = S.T @ (resid / var)
        u_norm = float(np.linalg.norm(u))
        if u_norm <= 1e-8:
            break
        w = link_est.deriv_at(eta) ** 2 / var
        A = (S * w[:, None]).T @ S
        try:
            delta = np.linalg.solve(A, u)
        except np.linalg.LinAlgError as exc:
            raise RankDeficiencyError("semiparametric score system is singular") from exc
        step = 1.0
        accepted = False
        for _ in range(10):
            cand = b + step * delta
            eta_c = S @ cand
            resid_c = (y - link_est.mean_at(eta_c)) * link_est.deriv_at(eta_c)
            var_c = np.maximum(link_est.variance_at(eta_c), VARIANCE_FLOOR)
            u_c = S.T @ (resid_c / var_c)
            if float(np.linalg.norm(u_c)) <= u_norm:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        b = cand
    return b


def spqr_fit(
    scores: ScoreMatrix,
    y,
    cfg: SmootherConfig = None,
    init_link: LinkSpec = None,
    max_outer: int = MAX_OUTER,
) -> tuple[ModelFit, LinkEstimate]:
    """Alternating semiparametric fit of direction, link and variance.

    Each outer iteration smooths the response against the current fitted
    predictors for the link and its derivative, smooths squared residuals
    for the variance, solves the score equation with those estimates, and
    renormalizes the direction with its sign aligned to the previous
    iterate. Stops when the direction changes by at most 1e-5 in any
    coordinate, or after max_outer iterations (converged=False).
    """
    cfg = cfg or SmootherConfig()
    if max_outer < 1:
        raise ValueError("max_outer must be positive")
    y = np.asarray(y, dtype=float)
    if np.all(y == y[0]):
        raise DataError("responses are degenerate; nothing to fit")
    if init_link is None:
        init_link = logit_link() if np.all(np.isin(y, (0.0, 1.0))) else identity_link()

    init_fit = iwls_fit(scores, y, init_link)
    b = init_fit.beta[1:]
    norm = float(np.linalg.norm(b))
    if norm < 1e-12:
        raise DegenerateLinkError("initialization produced a zero direction")
    b = b / norm

    S = scores.slopes
    trace = []
    converged = False
    iterations = 0
    # the bandwidth is frozen at the initialization-step value so the outer
    # alternation iterates a fixed map of the direction alone
    h = (
        cfg.bandwidth
        if cfg.bandwidth is not None
        else rule_of_thumb_bandwidth(S @ b)
    )
    for iterations in range(1, max_outer + 1):
        eta = S @ b
        grid, g_hat, g_prime = _smooth_link(eta, y, cfg, h)
        mu_i = np.interp(eta, grid, g_hat)
        resid2 = (y - mu_i) ** 2
        sigma2, floored, fell_back = _smooth_variance(
            eta, mu_i, resid2, grid, g_hat, cfg, h
        )
        link_est = LinkEstimate(grid, g_hat, g_prime, sigma2, floored)

        b_new = _inner_score_solve(S, y, b, link_est)
        norm = float(np.linalg.norm(b_new))
        if norm < 1e-12:
            raise DegenerateLinkError("score update produced a zero direction")
        b_new = b_new / norm
        if float(b_new @ b) < 0:
            b_new = -b_new
        change = float(np.max(np.abs(b_new - b)))
        trace.append(
            {
                "iteration": iterations,
                "beta_norm": float(np.linalg.norm(b_new)),
                "g_monotone": bool(np.all(np.diff(g_hat) >= 0)),
                "direction_dot": float(b_new @ b),
                "change": change,
                "bandwidth": float(h),
                "variance_fallback": bool(fell_back),
            }
        )
        b = b_new
        if change <= OUTER_TOL:
            converged = True
            break

    # final smoothing pass so the returned estimates match the final direction
    eta = S @ b
    grid, g_hat, g_prime = _smooth_link(eta, y, cfg, h)
    mu_i = np.interp(eta, grid, g_hat)
    resid2 = (y - mu_i) ** 2
    sigma2, floored, _ = _smooth_variance(eta, mu_i, resid2, grid, g_hat, cfg, h)
    link_est = LinkEstimate(grid, g_hat, g_prime, sigma2, floored)

    gamma = gamma_hat(scores, eta, link_est)
    fit = ModelFit(
        beta=np.concatenate(([0.0], b)),
        gamma_tilde=gamma,
        eta=eta,
        mu=link_est.mean_at(eta),
        converged=converged,
        iterations=iterations,
        deviance=quasi_deviance(link_est, y, eta),
        gamma_source="empirical_spqr",
        trace=tuple(trace),
    )
    return fit, link_est


def gamma_hat(scores: ScoreMatrix, eta_hat, link_est: LinkEstimate) -> np.ndarray:
    """Empirical weighted score covariance with estimated link and variance.

    Averages g'(eta)^2 / var(eta) times the score outer products. The
    variance lookup is floored and each subject's weight is capped at five
    times the median weight: kernel-estimated links can produce a handful
    of wildly inflated weights near the predictor range ends, which would
    otherwise dominate the average (for smooth parametric link shapes the
    weight spread stays well under the cap).
    """
    X = scores.values
    eta_hat = np.asarray(eta_hat, dtype=float)
    if eta_hat.size != X.shape[0]:
        raise ValueError("eta_hat does not match the score rows")
    gp = link_est.deriv_at(eta_hat)
    var = np.maximum(link_est.variance_at(eta_hat), VARIANCE_FLOOR)
    w = gp * gp / var
    w = np.minimum(w, 5.0 * float(np.median(w)))
    G = (X * w[:, None]).T @ X / X.shape[0]
    return 0.5 * (G + G.T)


def quasi_deviance(link_est: LinkEstimate, y, eta_hat) -> float:
    """Deviance analogue from integrating the estimated score.

    Integrates (y - g(s)) g'(s) / var(s) between each fitted predictor and
    the predictor level saturating the response, using the trapezoid rule
    on the link evaluation grid.
    """
    y = np.asarray(y, dtype=float)
    eta_hat = np.asarray(eta_hat, dtype=float)
    grid = link_est.eval_grid
    # near the grid ends the variance estimate sees few points and can
    # undershoot; an additional floor relative to its bulk level keeps the
    # integrand from blowing up there without touching the fit itself
    floor = max(VARIANCE_FLOOR, 0.05 * float(np.median(link_est.sigma2_hat)))
    base = link_est.g_prime_hat / np.maximum(link_est.sigma2_hat, floor)
    seg = 0.5 * np.diff(grid)
    integral_a = np.concatenate(([0.0], np.cumsum(seg * (base[1:] + base[:-1]))))
    gb = link_est.g_hat * base
    integral_b = np.concatenate(([0.0], np.cumsum(seg * (gb[1:] + gb[:-1]))))

    eta_fit = np.clip(eta_hat, grid[0], grid[-1])
    eta_sat = link_est.inverse_at(y)
    a_fit = np.interp(eta_fit, grid, integral_a)
    a_sat = np.interp(eta_sat, grid, integral_a)
    b_fit = np.interp(eta_fit, grid, integral_b)
    b_sat = np.interp(eta_sat, grid, integral_b)
    total = 2.0 * np.sum(y * (a_sat - a_fit) - (b_sat - b_fit))
    return float(total)
