"""Grid, weight, curve and dataset behavior, quadrature accuracy, CSV IO."""

import numpy as np
import pytest
from scipy.integrate import quad

from fglm import (
    Curve,
    FunctionalDataset,
    TimeGrid,
    WeightMeasure,
    center_dataset,
    inner_product,
    load_dataset,
    load_grid,
    quadrature_weights,
    resample_curves,
    save_dataset,
)
from fglm.errors import AlignmentError, DataError


def unit_grid(m=1001):
    return TimeGrid(np.linspace(0.0, 1.0, m))


class TestTimeGrid:
    def test_rejects_short_and_nonincreasing(self):
        with pytest.raises(DataError):
            TimeGrid([0.0])
        with pytest.raises(DataError):
            TimeGrid([0.0, 0.5, 0.5, 1.0])
        with pytest.raises(DataError):
            TimeGrid([0.0, np.nan, 1.0])

    def test_trapezoid_weights_sum_to_span(self):
        grid = TimeGrid([0.0, 0.1, 0.4, 1.0])
        assert np.isclose(grid.trapezoid_weights().sum(), 1.0)

    def test_immutable(self):
        grid = unit_grid(11)
        with pytest.raises(ValueError):
            grid.points[0] = 5.0


class TestWeightMeasure:
    def test_rejects_negative_and_all_zero(self):
        with pytest.raises(DataError):
            WeightMeasure([-1.0, 1.0])
        with pytest.raises(DataError):
            WeightMeasure([0.0, 0.0])

    def test_uniform_matches_grid(self):
        grid = unit_grid(11)
        assert len(WeightMeasure.uniform(grid)) == 11


class TestInnerProduct:
    def test_constant_one_integrates_to_one(self):
        grid = TimeGrid([0.0, 0.2, 0.3, 0.7, 1.0])
        one = Curve(np.ones(5))
        w = WeightMeasure.uniform(grid)
        assert inner_product(one, one, w, grid) == pytest.approx(1.0)

    def test_sine_orthogonality(self):
        grid = unit_grid()
        t = grid.points
        f = Curve(np.sqrt(2) * np.sin(np.pi * t))
        g = Curve(np.sqrt(2) * np.sin(2 * np.pi * t))
        w = WeightMeasure.uniform(grid)
        assert abs(inner_product(f, g, w, grid)) < 1e-9

    def test_sine_norm_against_quadrature_oracle(self):
        grid = unit_grid()
        t = grid.points
        f = Curve(np.sqrt(2) * np.sin(np.pi * t))
        w = WeightMeasure.uniform(grid)
        oracle, _ = quad(lambda s: 2.0 * np.sin(np.pi * s) ** 2, 0.0, 1.0)
        assert inner_product(f, f, w, grid) == pytest.approx(oracle, abs=1e-6)

    def test_symmetry_and_bilinearity(self):
        rng = np.random.default_rng(7)
        grid = unit_grid(101)
        w = WeightMeasure(rng.uniform(0.5, 2.0, 101))
        f = Curve(rng.standard_normal(101))
        g = Curve(rng.standard_normal(101))
        h = Curve(rng.standard_normal(101))
        fg = inner_product(f, g, w, grid)
        assert fg == pytest.approx(inner_product(g, f, w, grid), abs=1e-15)
        combo = Curve(2.5 * g.values - 0.5 * h.values)
        lhs = inner_product(f, combo, w, grid)
        rhs = 2.5 * fg - 0.5 * inner_product(f, h, w, grid)
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_nonnegative_on_self(self):
        rng = np.random.default_rng(8)
        grid = unit_grid(41)
        w = WeightMeasure.uniform(grid)
        for _ in range(25):
            f = Curve(rng.standard_normal(41))
            assert inner_product(f, f, w, grid) >= -1e-12

    def test_mismatched_lengths_raise(self):
        grid = unit_grid(11)
        w = WeightMeasure.uniform(grid)
        with pytest.raises(AlignmentError):
            inner_product(Curve(np.ones(10)), Curve(np.ones(11)), w, grid)


def make_dataset(curves, responses, kind="continuous"):
    curves = np.atleast_2d(curves)
    grid = TimeGrid(np.linspace(0.0, 1.0, curves.shape[1]))
    return FunctionalDataset(
        grid, WeightMeasure.uniform(grid), curves, responses, kind
    )


class TestFunctionalDataset:
    def test_binary_validation(self):
        with pytest.raises(DataError):
            make_dataset(np.ones((2, 5)), [0.0, 0.5], "binary")

    def test_count_validation(self):
        with pytest.raises(DataError):
            make_dataset(np.ones((2, 5)), [1.0, -2.0], "count")

    def test_rejects_nonfinite_curves(self):
        bad = np.ones((2, 5))
        bad[1, 3] = np.inf
        with pytest.raises(DataError):
            make_dataset(bad, [0.0, 1.0])

    def test_subset_keeps_ids(self):
        ds = make_dataset(np.arange(15.0).reshape(3, 5), [1.0, 2.0, 3.0])
        sub = ds.subset([2, 0])
        assert sub.subject_ids == ("2", "0")
        assert np.allclose(sub.responses, [3.0, 1.0])


class TestCenterDataset:
    def test_single_curve_centers_to_zero(self):
        ds = make_dataset(np.arange(5.0), [1.0])
        centered, mean = center_dataset(ds)
        assert np.allclose(centered.curve_values, 0.0)
        assert np.allclose(mean.values, np.arange(5.0))

    def test_symmetric_pair_unchanged(self):
        c = np.array([1.0, -2.0, 3.0, 0.5, 0.0])
        ds = make_dataset(np.vstack([c, -c]), [0.0, 1.0])
        centered, mean = center_dataset(ds)
        assert np.allclose(mean.values, 0.0)
        assert np.allclose(centered.curve_values, ds.curve_values)

    def test_random_curves_mean_below_tolerance(self):
        rng = np.random.default_rng(11)
        ds = make_dataset(rng.standard_normal((100, 31)), rng.standard_normal(100))
        centered, _ = center_dataset(ds)
        recomputed = centered.curve_values.mean(axis=0)
        assert np.max(np.abs(recomputed)) < 1e-12


class TestResample:
    def test_linear_functions_exact(self):
        source = unit_grid(11)
        target = TimeGrid(np.linspace(0.05, 0.95, 7))
        vals = 3.0 * source.points - 1.0
        out = resample_curves(vals, source, target)
        assert np.allclose(out[0], 3.0 * target.points - 1.0)

    def test_extrapolation_rejected(self):
        source = TimeGrid(np.linspace(0.2, 0.8, 5))
        target = unit_grid(5)
        with pytest.raises(DataError):
            resample_curves(np.zeros(5), source, target)


class TestCsvRoundTrip:
    def test_save_and_load(self, tmp_path):
        rng = np.random.default_rng(3)
        ds = make_dataset(rng.standard_normal((4, 6)), [0.0, 1.0, 1.0, 0.0], "binary")
        path = tmp_path / "data.csv"
        save_dataset(ds, path)
        loaded = load_dataset(path)
        assert loaded.response_kind == "binary"
        assert np.array_equal(loaded.curve_values, ds.curve_values)
        assert np.array_equal(loaded.responses, ds.responses)
        assert np.array_equal(loaded.grid.points, ds.grid.points)

    def test_sidecar_grid_file(self, tmp_path):
        gpath = tmp_path / "grid.txt"
        gpath.write_text("0.0, 0.5, 1.0\n")
        grid = load_grid(gpath)
        assert np.allclose(grid.points, [0.0, 0.5, 1.0])

    def test_wrong_column_count_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,response,0.0,0.5,1.0\na,1.0,1.0,2.0\n")
        with pytest.raises(DataError, match="columns"):
            load_dataset(path)

    def test_non_numeric_cell_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,response,0.0,0.5,1.0\na,1.0,1.0,oops,3.0\n")
        with pytest.raises(DataError, match=":2"):
            load_dataset(path)
