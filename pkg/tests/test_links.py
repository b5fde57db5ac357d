"""Link specifications: shapes, derivatives, variances, inverses."""

import numpy as np
import pytest

from fglm import LinkSpec, cloglog_link, get_link, identity_link, log_link, logit_link
from fglm.errors import NumericError


class TestLogit:
    def test_derivative_identity(self):
        link = logit_link()
        x = np.linspace(-8, 8, 201)
        mu = link.mean(x)
        assert np.max(np.abs(link.mean_deriv(x) - mu * (1 - mu))) < 1e-12

    def test_variance_is_bernoulli(self):
        link = logit_link()
        mu = np.linspace(0.01, 0.99, 50)
        assert np.allclose(link.variance(mu), mu * (1 - mu))

    def test_inverse_round_trip(self):
        link = logit_link()
        x = np.linspace(-5, 5, 50)
        assert np.max(np.abs(link.inverse(link.mean(x)) - x)) < 1e-8


class TestCloglog:
    def test_printed_form(self):
        link = cloglog_link()
        x = np.array([-1.0, 0.0, 0.5, 2.0])
        assert np.allclose(link.mean(x), np.exp(-np.exp(-x)))

    def test_increasing_and_bounded(self):
        link = cloglog_link()
        x = np.linspace(-5, 5, 200)
        mu = link.mean(x)
        assert np.all(np.diff(mu) > 0)
        assert np.all((mu > 0) & (mu < 1))

    def test_inverse_round_trip(self):
        link = cloglog_link()
        x = np.linspace(-2, 4, 50)
        assert np.max(np.abs(link.inverse(link.mean(x)) - x)) < 1e-8

    def test_extreme_arguments_stay_finite(self):
        link = cloglog_link()
        vals = link.mean(np.array([-1000.0, 1000.0]))
        assert np.all(np.isfinite(vals))


class TestOtherLinks:
    def test_identity_unit_variance(self):
        link = identity_link()
        assert np.allclose(link.variance(np.array([-3.0, 5.0])), 1.0)
        assert np.allclose(link.mean(np.array([1.5])), 1.5)

    def test_log_variance_equals_mean(self):
        link = log_link()
        mu = np.array([0.5, 2.0, 7.0])
        assert np.allclose(link.variance(mu), mu)

    def test_negative_count_rejected_in_deviance(self):
        link = log_link()
        import pytest as _pytest
        from fglm.errors import NumericError as _NumericError

        with _pytest.raises(_NumericError, match="row 1"):
            link.deviance(np.array([1.0, -2.0]), np.array([1.0, 1.0]))

    def test_poisson_deviance_at_zero_count(self):
        link = log_link()
        # y log y -> 0 at y = 0
        d = link.unit_deviance(np.array([0.0]), np.array([2.0]))
        assert d[0] == pytest.approx(4.0)


class TestDerivativeConsistency:
    @pytest.mark.parametrize("name", ["logit", "cloglog", "identity", "log"])
    def test_matches_central_difference(self, name):
        link = get_link(name)
        x = np.linspace(-3, 3, 61)
        h = 1e-6
        fd = (np.asarray(link.mean(x + h)) - np.asarray(link.mean(x - h))) / (2 * h)
        scale = np.maximum(np.abs(fd), 1e-8)
        assert np.max(np.abs(link.mean_deriv(x) - fd) / scale) < 1e-5


class TestValidation:
    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown link"):
            get_link("probit")

    def test_wrong_derivative_rejected_at_construction(self):
        with pytest.raises(NumericError, match="mean_deriv"):
            LinkSpec(
                name="broken",
                mean=lambda x: np.asarray(x, float),
                mean_deriv=lambda x: 2.0 * np.ones_like(np.asarray(x, float)),
                variance=lambda mu: np.ones_like(np.asarray(mu, float)),
                inverse=lambda mu: np.asarray(mu, float),
                unit_deviance=lambda y, mu: (y - mu) ** 2,
            )

    def test_nonmonotone_mean_rejected(self):
        with pytest.raises(NumericError, match="monotone"):
            LinkSpec(
                name="wiggle",
                mean=lambda x: np.sin(np.asarray(x, float)),
                mean_deriv=lambda x: np.cos(np.asarray(x, float)),
                variance=lambda mu: np.ones_like(np.asarray(mu, float)),
                inverse=lambda mu: np.asarray(mu, float),
                unit_deviance=lambda y, mu: (y - mu) ** 2,
            )
