"""Mean, derivative and variance functions for quasi-likelihood fitting.

The mean function maps the linear predictor to the conditional mean (the
inverse of the textbook GLM convention). Each named specification also
carries the inverse mean map and a closed-form unit deviance so order
selection does not need numeric integration for the known-link families.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit, logit as _logit, xlogy

from .errors import NumericError

MU_EPS = 1e-10  # clamp for means of bounded-support families
VAR_FLOOR = 1e-10  # lower bound enforced on every variance evaluation

LINK_NAMES = ("logit", "cloglog", "identity", "log")


@dataclass(frozen=True)
class LinkSpec:
    """A link/variance pair evaluated pointwise on arrays.

    mean maps eta to mu, mean_deriv is its derivative, variance maps mu to
    the conditional variance. unit_deviance(y, mu) integrates the quasi
    score between the saturated and fitted means; inverse maps mu back to
    eta (used for initialization and saturated terms).
    """

    name: str
    mean: Callable
    mean_deriv: Callable
    variance: Callable
    inverse: Callable
    unit_deviance: Callable
    binary_mean: bool = False  # mean confined to (0, 1)
    probe_range: tuple = field(default=(-4.0, 4.0))

    def __post_init__(self):
        probe = np.linspace(*self.probe_range, 41)
        mu = np.asarray(self.mean(probe), dtype=float)
        if not np.all(np.isfinite(mu)):
            raise NumericError(f"link {self.name!r}: mean not finite on probe grid")
        if not (np.all(np.diff(mu) > 0) or np.all(np.diff(mu) < 0)):
            raise NumericError(f"link {self.name!r}: mean not monotone on probe grid")
        h = 1e-5
        fd = (np.asarray(self.mean(probe + h)) - np.asarray(self.mean(probe - h))) / (2 * h)
        an = np.asarray(self.mean_deriv(probe), dtype=float)
        scale = np.maximum(np.abs(fd), 1e-8)
        if np.max(np.abs(an - fd) / scale) > 1e-5:
            raise NumericError(
                f"link {self.name!r}: mean_deriv disagrees with finite differences"
            )

    def variance_floored(self, mu):
        """Variance evaluation with the global positivity floor applied."""
        return np.maximum(np.asarray(self.variance(mu), dtype=float), VAR_FLOOR)

    def deviance(self, y, mu) -> float:
        """Total deviance: the unit deviances summed over observations."""
        units = np.asarray(
            self.unit_deviance(np.asarray(y, float), np.asarray(mu, float)), dtype=float
        )
        bad = ~np.isfinite(units)
        if np.any(bad):
            row = int(np.nonzero(bad)[0][0])
            raise NumericError(
                f"non-finite unit deviance at row {row}; response outside "
                f"the support of the {self.name!r} family"
            )
        return float(np.sum(units))


def _unit_clamper(eps):
    def clamp(mu):
        return np.clip(mu, eps, 1.0 - eps)

    return clamp


def _bernoulli_unit_deviance(clamp):
    def unit_deviance(y, mu):
        mu = clamp(mu)
        yc = np.clip(y, 0.0, 1.0)
        return 2.0 * (
            xlogy(yc, yc) - xlogy(yc, mu) + xlogy(1 - yc, 1 - yc) - xlogy(1 - yc, 1 - mu)
        )

    return unit_deviance


def _poisson_unit_deviance(y, mu):
    mu = np.maximum(mu, MU_EPS)
    return 2.0 * (xlogy(y, y) - xlogy(y, mu) - (y - mu))


def logit_link(mu_eps: float = MU_EPS) -> LinkSpec:
    """Expit mean with Bernoulli variance; means clamped by mu_eps."""
    clamp = _unit_clamper(mu_eps)
    return LinkSpec(
        name="logit",
        mean=expit,
        mean_deriv=lambda x: expit(x) * (1.0 - expit(x)),
        variance=lambda mu: clamp(mu) * (1.0 - clamp(mu)),
        inverse=lambda mu: _logit(clamp(mu)),
        unit_deviance=_bernoulli_unit_deviance(clamp),
        binary_mean=True,
    )


def _cloglog_mean(x):
    return np.exp(-np.exp(-np.clip(x, -700.0, None)))


def _cloglog_deriv(x):
    xc = np.clip(x, -700.0, None)
    return np.exp(-np.exp(-xc) - xc)


def cloglog_link(mu_eps: float = MU_EPS) -> LinkSpec:
    """Gumbel-CDF mean exp(-exp(-x)) with Bernoulli variance."""
    clamp = _unit_clamper(mu_eps)
    return LinkSpec(
        name="cloglog",
        mean=_cloglog_mean,
        mean_deriv=_cloglog_deriv,
        variance=lambda mu: clamp(mu) * (1.0 - clamp(mu)),
        inverse=lambda mu: -np.log(-np.log(clamp(mu))),
        unit_deviance=_bernoulli_unit_deviance(clamp),
        binary_mean=True,
    )


def identity_link(mu_eps: float = MU_EPS) -> LinkSpec:
    """Identity mean with constant unit variance."""
    return LinkSpec(
        name="identity",
        mean=lambda x: np.asarray(x, dtype=float),
        mean_deriv=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        variance=lambda mu: np.ones_like(np.asarray(mu, dtype=float)),
        inverse=lambda mu: np.asarray(mu, dtype=float),
        unit_deviance=lambda y, mu: (y - mu) ** 2,
    )


def log_link(mu_eps: float = MU_EPS) -> LinkSpec:
    """Exponential mean with variance equal to the mean (counts)."""
    floor = max(mu_eps, 1e-300)
    return LinkSpec(
        name="log",
        mean=lambda x: np.exp(np.clip(x, None, 700.0)),
        mean_deriv=lambda x: np.exp(np.clip(x, None, 700.0)),
        variance=lambda mu: np.maximum(mu, floor),
        inverse=lambda mu: np.log(np.maximum(mu, floor)),
        unit_deviance=_poisson_unit_deviance,
        probe_range=(-4.0, 4.0),
    )


_FACTORIES = {
    "logit": logit_link,
    "cloglog": cloglog_link,
    "identity": identity_link,
    "log": log_link,
}


def get_link(name: str, mu_eps: float = MU_EPS) -> LinkSpec:
    """Named link lookup; raises ValueError for unknown names.

    mu_eps sets the clamp applied to means of bounded-support families
    before variance and inverse evaluations.
    """
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(
            f"unknown link {name!r}; choose from {sorted(_FACTORIES)}"
        ) from None
    return factory(mu_eps)
