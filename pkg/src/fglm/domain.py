"""Sampled curves, weight measures and quadrature on a fixed grid.

All quantities live on a common strictly increasing grid; integrals are
composite trapezoid sums optionally weighted by a nonnegative density.
Objects are immutable after construction and safe to share.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DataError

RESPONSE_KINDS = ("continuous", "binary", "count")


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing observation times spanning the domain."""

    points: np.ndarray

    def __post_init__(self):
        pts = _as_float_array(self.points, "grid points")
        if pts.size < 2:
            raise DataError("grid needs at least 2 points")
        if np.any(np.diff(pts) <= 0):
            raise DataError("grid points must be strictly increasing")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size

    @property
    def span(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    def trapezoid_weights(self) -> np.ndarray:
        """Node weights of the composite trapezoid rule on this grid."""
        pts = self.points
        w = np.empty_like(pts)
        w[0] = 0.5 * (pts[1] - pts[0])
        w[-1] = 0.5 * (pts[-1] - pts[-2])
        w[1:-1] = 0.5 * (pts[2:] - pts[:-2])
        return w


@dataclass(frozen=True)
class WeightMeasure:
    """Density values of the integration measure at the grid points."""

    values: np.ndarray

    def __post_init__(self):
        vals = _as_float_array(self.values, "weight values")
        if np.any(vals < 0):
            raise DataError("weight values must be nonnegative")
        if not np.any(vals > 0):
            raise DataError("weight measure must be positive somewhere")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def uniform(cls, grid: TimeGrid) -> "WeightMeasure":
        """Constant unit density, the default choice."""
        return cls(np.ones(len(grid)))

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Curve:
    """A single sampled function aligned with a grid."""

    values: np.ndarray

    def __post_init__(self):
        vals = _as_float_array(self.values, "curve values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size


def quadrature_weights(grid: TimeGrid, weight: WeightMeasure) -> np.ndarray:
    """Combined node weights: trapezoid rule times the measure density."""
    if len(weight) != len(grid):
        raise AlignmentError(
            f"weight length {len(weight)} != grid length {len(grid)}"
        )
    return grid.trapezoid_weights() * weight.values


def inner_product(f: Curve, g: Curve, weight: WeightMeasure, grid: TimeGrid) -> float:
    """Weighted L2 inner product of two curves by the trapezoid rule.

    Exact whenever the pointwise product f*g*v is piecewise linear
    between grid nodes.
    """
    m = len(grid)
    if len(f) != m or len(g) != m or len(weight) != m:
        raise AlignmentError("curves and weight must match the grid length")
    qw = quadrature_weights(grid, weight)
    return float(np.dot(f.values * g.values, qw))


@dataclass(frozen=True)
class FunctionalDataset:
    """n predictor curves on a shared grid plus n scalar responses."""

    grid: TimeGrid
    weight: WeightMeasure
    curve_values: np.ndarray  # shape (n, m), one row per subject
    responses: np.ndarray  # shape (n,)
    response_kind: str = "continuous"
    subject_ids: tuple = field(default=None)

    def __post_init__(self):
        vals = np.asarray(self.curve_values, dtype=float)
        if vals.ndim == 1:
            vals = vals[None, :]
        if vals.ndim != 2:
            raise DataError("curve values must form an (n, m) matrix")
        if vals.shape[1] != len(self.grid):
            raise AlignmentError(
                f"curves have {vals.shape[1]} points, grid has {len(self.grid)}"
            )
        if len(self.weight) != len(self.grid):
            raise AlignmentError("weight measure does not match the grid")
        if not np.all(np.isfinite(vals)):
            raise DataError("curve values contain non-finite entries")
        y = _as_float_array(self.responses, "responses")
        if y.size != vals.shape[0]:
            raise AlignmentError(
                f"{y.size} responses for {vals.shape[0]} curves"
            )
        if y.size < 1:
            raise DataError("dataset needs at least one subject")
        if self.response_kind not in RESPONSE_KINDS:
            raise DataError(f"unknown response kind {self.response_kind!r}")
        if self.response_kind == "binary" and not np.all(np.isin(y, (0.0, 1.0))):
            raise DataError("binary responses must be 0 or 1")
        if self.response_kind == "count" and (
            np.any(y < 0) or np.any(y != np.round(y))
        ):
            raise DataError("count responses must be nonnegative integers")
        ids = self.subject_ids
        if ids is None:
            ids = tuple(str(i) for i in range(y.size))
        else:
            ids = tuple(str(s) for s in ids)
            if len(ids) != y.size:
                raise AlignmentError("subject ids do not match the sample size")
        vals.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "curve_values", vals)
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "subject_ids", ids)

    @property
    def n(self) -> int:
        return self.curve_values.shape[0]

    @property
    def m(self) -> int:
        return self.curve_values.shape[1]

    def curve(self, i: int) -> Curve:
        return Curve(self.curve_values[i].copy())

    def subset(self, index) -> "FunctionalDataset":
        """Dataset restricted to the given subject indices."""
        idx = np.asarray(index)
        return FunctionalDataset(
            self.grid,
            self.weight,
            self.curve_values[idx].copy(),
            self.responses[idx].copy(),
            self.response_kind,
            tuple(self.subject_ids[i] for i in np.atleast_1d(idx)),
        )


def center_dataset(ds: FunctionalDataset) -> tuple[FunctionalDataset, Curve]:
    """Subtract the pointwise sample mean curve from every curve.

    Returns the centered dataset together with the mean curve.
    """
    mean = ds.curve_values.mean(axis=0)
    centered = FunctionalDataset(
        ds.grid,
        ds.weight,
        ds.curve_values - mean,
        ds.responses.copy(),
        ds.response_kind,
        ds.subject_ids,
    )
    return centered, Curve(mean)


def resample_curves(values: np.ndarray, source: TimeGrid, target: TimeGrid) -> np.ndarray:
    """Linearly interpolate curves onto a new grid.

    Lossy preprocessing convenience; the target grid must lie inside the
    source span.
    """
    lo, hi = source.span
    tlo, thi = target.span
    if tlo < lo - 1e-12 or thi > hi + 1e-12:
        raise DataError("target grid extends beyond the source grid span")
    values = np.atleast_2d(np.asarray(values, dtype=float))
    out = np.empty((values.shape[0], len(target)))
    for i in range(values.shape[0]):
        out[i] = np.interp(target.points, source.points, values[i])
    return out


def _parse_grid_line(line: str) -> np.ndarray:
    parts = line.replace(",", " ").split()
    try:
        return np.asarray([float(p) for p in parts], dtype=float)
    except ValueError as exc:
        raise DataError(f"cannot parse grid points: {exc}") from exc


def load_grid(path) -> TimeGrid:
    """Read grid points from a one-line sidecar file."""
    with open(path, "r", encoding="utf-8") as fh:
        content = fh.read().strip()
    if not content:
        raise DataError(f"grid file {path} is empty")
    return TimeGrid(_parse_grid_line(content.splitlines()[0]))


def load_dataset(
    path,
    grid: TimeGrid = None,
    response_kind: str = None,
    weight: WeightMeasure = None,
) -> FunctionalDataset:
    """Read a wide-format CSV: id, response, then the m curve values.

    When no grid is supplied, the header cells after the response column
    must parse as the grid points. The column count is enforced on every
    row.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row and at least one subject row")
    header = rows[0]
    if len(header) < 3:
        raise DataError(f"{path}: header must list id, response and curve columns")
    if grid is None:
        grid = TimeGrid(_parse_grid_line(",".join(header[2:])))
    m = len(grid)
    if len(header) != m + 2:
        raise DataError(
            f"{path}: header has {len(header)} columns, expected {m + 2}"
        )
    ids, responses, curves = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != m + 2:
            raise DataError(
                f"{path}:{lineno}: expected {m + 2} columns, found {len(row)}"
            )
        ids.append(row[0].strip())
        try:
            responses.append(float(row[1]))
            curves.append([float(c) for c in row[2:]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    responses = np.asarray(responses)
    if response_kind is None:
        if np.all(np.isin(responses, (0.0, 1.0))):
            response_kind = "binary"
        elif np.all((responses >= 0) & (responses == np.round(responses))):
            response_kind = "count"
        else:
            response_kind = "continuous"
    if weight is None:
        weight = WeightMeasure.uniform(grid)
    return FunctionalDataset(
        grid, weight, np.asarray(curves), responses, response_kind, tuple(ids)
    )


def save_dataset(ds: FunctionalDataset, path) -> None:
    """Write a dataset in the wide CSV format accepted by load_dataset."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "response"] + [repr(float(t)) for t in ds.grid.points])
        for i in range(ds.n):
            writer.writerow(
                [ds.subject_ids[i], repr(float(ds.responses[i]))]
                + [repr(float(v)) for v in ds.curve_values[i]]
            )
