"""Deviance-based order selection and leave-one-out prediction metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import Basis, ScoreMatrix, project_scores
from .domain import FunctionalDataset
from .errors import DataError, FglmError, SelectionError
from .glm import ModelFit, SolverConfig, iwls_fit
from .links import get_link
from .smoothing import SmootherConfig
from .spqr import LinkEstimate, quasi_deviance, spqr_fit

CRITERIA = ("aic", "bic")


def penalty(p: int, n: int, criterion: str) -> float:
    """Complexity penalty: 2p for aic, p log n for bic."""
    if criterion == "aic":
        return 2.0 * p
    if criterion == "bic":
        return p * math.log(n)
    raise ValueError(f"criterion must be one of {CRITERIA}")


def deviance(fit: ModelFit, y, link) -> float:
    """Deviance of a fit: twice the saturated-minus-fitted gap.

    Pass the link specification for known-link fits, or the estimated
    link for semiparametric fits (integrated-score analogue).
    """
    y = np.asarray(y, dtype=float)
    if isinstance(link, LinkEstimate):
        return quasi_deviance(link, y, fit.eta)
    return link.deviance(y, fit.mu)


@dataclass(frozen=True)
class FitMethod:
    """How to fit at a given order: a named link or the semiparametric path."""

    link: str = "logit"
    solver: SolverConfig = None
    smoother: SmootherConfig = None
    init_link: str = "logit"
    clamp_eps: float = 1e-10
    max_outer: int = 25

    def __post_init__(self):
        if self.link != "spqr":
            get_link(self.link)  # validates the name

    @property
    def is_spqr(self) -> bool:
        return self.link == "spqr"

    def fit(self, scores: ScoreMatrix, y):
        """Returns (fit, predictor) where predictor maps score rows to means."""
        if self.is_spqr:
            fit, link_est = spqr_fit(
                scores,
                y,
                self.smoother,
                get_link(self.init_link, self.clamp_eps),
                max_outer=self.max_outer,
            )
            b = fit.beta[1:]

            def predict(rows: np.ndarray) -> np.ndarray:
                return np.asarray(link_est.mean_at(rows[:, 1:] @ b))

            return fit, predict
        link = get_link(self.link, self.clamp_eps)
        fit = iwls_fit(scores, y, link, self.solver)

        def predict(rows: np.ndarray) -> np.ndarray:
            return np.asarray(link.mean(rows @ fit.beta), dtype=float)

        return fit, predict


@dataclass(frozen=True)
class OrderSelection:
    """Candidate orders with their criterion values and the minimizer.

    penalties holds the exact complexity terms added to each deviance, so
    the decomposition of the criterion is available without reconstructing
    it through floating-point subtraction.
    """

    candidate_orders: tuple
    criterion_values: tuple
    deviances: tuple
    penalties: tuple
    chosen: int
    criterion: str
    failures: tuple = ()

    def __post_init__(self):
        if self.chosen not in self.candidate_orders:
            raise ValueError("chosen order must be among the candidates")


def default_order_range(n: int, J: int) -> range:
    """Orders 1..min(20, ceil(2 n^(1/4)), J, n-2)."""
    cap = min(20, math.ceil(2.0 * n**0.25), J, n - 2)
    return range(1, max(cap, 1) + 1)


def select_order(
    ds: FunctionalDataset,
    basis: Basis,
    method: FitMethod = None,
    criterion: str = "aic",
    p_range=None,
) -> OrderSelection:
    """Fit every candidate order and pick the penalized-deviance minimizer.

    Candidates whose fit fails are excluded and reported; ties go to the
    smallest order.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    method = method or FitMethod()
    candidates = list(p_range) if p_range is not None else list(
        default_order_range(ds.n, basis.size)
    )
    if not candidates:
        raise SelectionError("empty candidate order range")
    if min(candidates) < 1 or max(candidates) > min(basis.size, ds.n - 2):
        raise ValueError(
            f"candidate orders must lie in 1..{min(basis.size, ds.n - 2)}"
        )

    scores_full = project_scores(ds, basis, max(candidates))
    y = ds.responses
    orders, crits, devs, pens, failures = [], [], [], [], []
    for p in candidates:
        scores_p = scores_full.truncated(p)
        try:
            fit, _ = method.fit(scores_p, y)
        except FglmError as exc:
            failures.append((p, f"{type(exc).__name__}: {exc}"))
            continue
        if not fit.converged:
            failures.append((p, "fit did not converge"))
            continue
        d = float(fit.deviance)
        pen = penalty(p, ds.n, criterion)
        orders.append(p)
        devs.append(d)
        pens.append(pen)
        crits.append(d + pen)
    if not orders:
        raise SelectionError(
            "no candidate order could be fit: "
            + "; ".join(f"p={p}: {msg}" for p, msg in failures)
        )
    chosen = orders[int(np.argmin(crits))]
    return OrderSelection(
        candidate_orders=tuple(orders),
        criterion_values=tuple(crits),
        deviances=tuple(devs),
        penalties=tuple(pens),
        chosen=chosen,
        criterion=criterion,
        failures=tuple(failures),
    )


@dataclass(frozen=True)
class LooPredictions:
    """Per-subject leave-one-out mean predictions."""

    predictions: np.ndarray  # nan where the fold failed
    n_skipped: int


def loo_predictions(
    ds: FunctionalDataset, basis: Basis, p: int, method: FitMethod = None
) -> LooPredictions:
    """Refit without each subject in turn and predict its response mean.

    The semiparametric path reuses the full-data bandwidth across folds so
    the procedure stays deterministic and comparable.
    """
    if ds.n < 10:
        raise DataError("leave-one-out needs at least 10 subjects")
    method = method or FitMethod()
    scores = project_scores(ds, basis, p)
    y = ds.responses

    if method.is_spqr and (method.smoother is None or method.smoother.bandwidth is None):
        full_fit, _ = method.fit(scores, y)
        h = full_fit.trace[-1]["bandwidth"]
        base = method.smoother or SmootherConfig()
        method = FitMethod(
            link=method.link,
            solver=method.solver,
            smoother=SmootherConfig(bandwidth=h, degree=base.degree, kernel=base.kernel),
            init_link=method.init_link,
        )

    preds = np.full(ds.n, np.nan)
    skipped = 0
    for i in range(ds.n):
        keep = np.ones(ds.n, dtype=bool)
        keep[i] = False
        fold = ScoreMatrix(scores.values[keep].copy())
        try:
            fit, predict = method.fit(fold, y[keep])
            if not fit.converged:
                skipped += 1
                continue
            preds[i] = float(predict(scores.values[i : i + 1])[0])
        except FglmError:
            skipped += 1
    return LooPredictions(preds, skipped)


def loo_prediction_error(
    ds: FunctionalDataset, basis: Basis, p: int, method: FitMethod = None
) -> float:
    """Average squared gap between responses and leave-one-out predictions."""
    loo = loo_predictions(ds, basis, p, method)
    ok = np.isfinite(loo.predictions)
    if not np.any(ok):
        raise SelectionError("every leave-one-out fold failed")
    return float(np.mean((ds.responses[ok] - loo.predictions[ok]) ** 2))


def loo_misclassification(
    ds: FunctionalDataset,
    basis: Basis,
    p: int,
    method: FitMethod = None,
    threshold: float = 0.5,
) -> tuple[float, float, float]:
    """Leave-one-out misclassification rates (class 0, class 1, overall).

    Subjects are classified as 1 when the held-out predicted mean reaches
    the threshold.
    """
    if ds.response_kind != "binary":
        raise DataError("misclassification rates need binary responses")
    loo = loo_predictions(ds, basis, p, method)
    ok = np.isfinite(loo.predictions)
    y = ds.responses[ok]
    pred = (loo.predictions[ok] >= threshold).astype(float)
    zeros = y == 0
    ones = y == 1
    rate0 = float(np.mean(pred[zeros] != 0)) if np.any(zeros) else float("nan")
    rate1 = float(np.mean(pred[ones] != 1)) if np.any(ones) else float("nan")
    overall = float(np.mean(pred != y))
    return rate0, rate1, overall
