"""Replication experiments: generator fidelity, determinism, calibration."""

import numpy as np
import pytest

from fglm import (
    SimDesign,
    coverage_experiment,
    fourier_basis,
    generate_sample,
    link_misspec_experiment,
    power_experiment,
    project_scores,
    quadrature_weights,
    statistic_calibration,
)
from fglm.simulate import replication_rng


class TestGenerateSample:
    def test_zero_signal_balances_responses(self):
        n = 2000
        ds = generate_sample(SimDesign(n=n, coeff_scale=0.0, seed=91), rep=0)
        assert abs(ds.responses.mean() - 0.5) <= 3.0 * np.sqrt(0.25 / n)

    def test_leading_score_variance(self):
        ds = generate_sample(SimDesign(n=2000, seed=92), rep=0)
        basis = fourier_basis(5, ds.grid)
        scores = project_scores(ds, basis, 5)
        v1 = float(np.var(scores.slopes[:, 0]))
        assert abs(v1 - 1.0) <= 0.15

    def test_same_seed_bit_identical(self):
        d = SimDesign(n=50, seed=93)
        a = generate_sample(d, rep=7)
        b = generate_sample(d, rep=7)
        assert np.array_equal(a.curve_values, b.curve_values)
        assert np.array_equal(a.responses, b.responses)

    def test_different_reps_differ(self):
        d = SimDesign(n=50, seed=93)
        a = generate_sample(d, rep=0)
        b = generate_sample(d, rep=1)
        assert not np.array_equal(a.responses, b.responses)

    def test_curves_vanish_at_domain_ends(self):
        ds = generate_sample(SimDesign(n=10, seed=94), rep=0)
        assert np.allclose(ds.curve_values[:, 0], 0.0)
        assert np.allclose(ds.curve_values[:, -1], 0.0)

    def test_true_coefficients_scaled(self):
        d = SimDesign(n=10, coeff_scale=2.0, seed=1)
        assert np.allclose(d.true_coefficients(4), [2.0, 2.0, 1.0, 2.0 / 3.0, 0.0])

    def test_design_validation(self):
        with pytest.raises(ValueError):
            SimDesign(n=0)
        with pytest.raises(ValueError):
            SimDesign(n=10, link_true="probit")

    def test_substreams_reproducible(self):
        r1 = replication_rng(5, 3).standard_normal(4)
        r2 = replication_rng(5, 3).standard_normal(4)
        assert np.array_equal(r1, r2)


class TestPowerExperiment:
    def test_deterministic_and_monotone_in_delta(self):
        res1 = power_experiment([0.0, 1.0, 2.0], [100], n_reps=60, seed=95)
        res2 = power_experiment([0.0, 1.0, 2.0], [100], n_reps=60, seed=95)
        rates1 = [c.rejection_rate for c in res1.cells]
        rates2 = [c.rejection_rate for c in res2.cells]
        assert rates1 == rates2
        assert rates1[1] >= rates1[0] - 0.05
        assert rates1[2] >= rates1[1] - 0.05

    def test_raw_values_alongside_summary(self):
        res = power_experiment([1.0], [80], n_reps=25, seed=96)
        raw = res.raw[(1.0, 80)]
        ok = np.isfinite(raw)
        assert res.cells[0].rejection_rate == pytest.approx(np.mean(raw[ok]))


class TestStatisticCalibration:
    def test_statistic_bounded_below(self):
        res = statistic_calibration(n=400, p=3, n_reps=40, seed=97)
        q = 4  # intercept plus three slopes
        assert np.all(res.t_values >= -np.sqrt(q / 2.0) - 1e-12)

    def test_moments_in_loose_range(self):
        res = statistic_calibration(n=600, p=3, n_reps=80, seed=98)
        assert -0.6 < res.mean < 0.6
        assert 0.5 < res.sd < 1.8
        assert res.qq_theoretical.size == res.t_values.size


class TestCoverageExperiment:
    def test_nested_in_alpha(self):
        lo = coverage_experiment(n=200, p=3, alpha=0.05, n_reps=60, seed=99)
        hi = coverage_experiment(n=200, p=3, alpha=0.5, n_reps=60, seed=99)
        assert hi.coverage_rate < lo.coverage_rate
        assert 0.7 <= lo.coverage_rate <= 1.0

    def test_raw_indicators_match_rate(self):
        res = coverage_experiment(n=150, p=2, alpha=0.1, n_reps=40, seed=100)
        assert res.coverage_rate == pytest.approx(np.mean(res.covered))


class TestExperimentOptions:
    def test_empirical_basis_mode_runs(self):
        res = power_experiment([1.0], [120], n_reps=8, seed=102, basis_mode="empirical")
        assert 0.0 <= res.cells[0].rejection_rate <= 1.0

    def test_aic_per_rep_option(self):
        res = power_experiment([1.5], [120], n_reps=6, seed=103, select_p_by_aic=True)
        assert res.cells[0].n_failed <= 1

    def test_population_gamma_option(self):
        res = statistic_calibration(n=500, p=3, n_reps=25, seed=104, gamma="population")
        assert np.isfinite(res.mean) and res.sd > 0
        with pytest.raises(ValueError):
            statistic_calibration(n=100, p=2, n_reps=2, gamma="exact")


class TestLinkMisspecExperiment:
    def test_parametric_only_smoke(self):
        res = link_misspec_experiment(
            n=250, n_reps=4, seed=101, fitters=("logit", "cloglog")
        )
        qw = quadrature_weights(
            fourier_basis(3, generate_sample(SimDesign(n=2, seed=1), 0).grid).grid,
            generate_sample(SimDesign(n=2, seed=1), 0).weight,
        )
        assert np.dot(res.truth**2, qw) == pytest.approx(1.0, abs=1e-9)
        for key, curve in res.mean_curves.items():
            assert curve.shape == res.grid.shape
            assert res.l2_errors[key].size == 4
