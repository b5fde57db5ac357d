"""Orthonormal bases on a grid: sine system and empirical eigenbasis.

A basis carries the grid and weight measure it is orthonormal under, so
projection and reconstruction need no extra context. The empirical
eigenbasis discretizes the covariance operator with quadrature weights,
solves a symmetric eigenproblem, and fixes signs deterministically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .domain import Curve, FunctionalDataset, TimeGrid, WeightMeasure, quadrature_weights
from .errors import DataError, ResolutionError

GRAM_TOL = 1e-6
EIGENVALUE_REL_FLOOR = 1e-10


@dataclass(frozen=True)
class Basis:
    """Ordered orthonormal functions evaluated on a shared grid."""

    grid: TimeGrid
    weight: WeightMeasure
    functions: np.ndarray  # shape (J, m), one row per basis function
    kind: str  # "fourier" or "empirical"
    eigenvalues: np.ndarray = None  # present iff empirical

    def __post_init__(self):
        funcs = np.asarray(self.functions, dtype=float)
        if funcs.ndim != 2 or funcs.shape[1] != len(self.grid):
            raise DataError("basis functions must form a (J, m) matrix on the grid")
        if funcs.shape[0] < 1:
            raise DataError("basis needs at least one function")
        gram = self.gram_matrix(funcs)
        err = np.max(np.abs(gram - np.eye(funcs.shape[0])))
        if err > GRAM_TOL:
            raise ResolutionError(
                f"basis is not orthonormal on this grid (Gram error {err:.2e}); "
                "use a finer grid or fewer functions"
            )
        if self.eigenvalues is not None:
            ev = np.asarray(self.eigenvalues, dtype=float)
            if ev.size != funcs.shape[0]:
                raise DataError("one eigenvalue per basis function required")
            if np.any(np.diff(ev) > 1e-12) or np.any(ev < -1e-10):
                raise DataError("eigenvalues must be nonincreasing and nonnegative")
            ev.flags.writeable = False
            object.__setattr__(self, "eigenvalues", ev)
        funcs.flags.writeable = False
        object.__setattr__(self, "functions", funcs)

    def gram_matrix(self, funcs: np.ndarray = None) -> np.ndarray:
        """Pairwise inner products of the basis functions under the quadrature."""
        if funcs is None:
            funcs = self.functions
        qw = quadrature_weights(self.grid, self.weight)
        return (funcs * qw) @ funcs.T

    @property
    def size(self) -> int:
        return self.functions.shape[0]

    def function(self, j: int) -> Curve:
        """The j-th basis function (1-based to match coefficient indexing)."""
        return Curve(self.functions[j - 1].copy())


@dataclass(frozen=True)
class ScoreMatrix:
    """Per-subject projection coefficients, intercept column first.

    Column 0 is identically one; columns 1..p hold the inner products of
    each curve with the first p basis functions.
    """

    values: np.ndarray  # shape (n, p+1)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2 or vals.shape[1] < 2:
            raise DataError("score matrix must be (n, p+1) with p >= 1")
        if not np.all(vals[:, 0] == 1.0):
            raise DataError("score matrix column 0 must be identically 1")
        if not np.all(np.isfinite(vals)):
            raise DataError("score matrix contains non-finite entries")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1] - 1

    @property
    def slopes(self) -> np.ndarray:
        """The score columns without the intercept column."""
        return self.values[:, 1:]

    def truncated(self, p: int) -> "ScoreMatrix":
        """Scores restricted to the first p basis directions."""
        if not 1 <= p <= self.p:
            raise ValueError(f"p={p} outside 1..{self.p}")
        return ScoreMatrix(self.values[:, : p + 1].copy())


def fourier_basis(J: int, grid: TimeGrid, weight: WeightMeasure = None) -> Basis:
    """First J functions of the orthonormal sine system on the grid span.

    On [0, 1] these are sqrt(2) sin(pi j t); on a general interval they are
    rescaled to stay orthonormal under the unit weight.
    """
    if J < 1:
        raise ValueError("J must be positive")
    if weight is None:
        weight = WeightMeasure.uniform(grid)
    a, b = grid.span
    u = (grid.points - a) / (b - a)
    j = np.arange(1, J + 1)[:, None]
    funcs = np.sqrt(2.0 / (b - a)) * np.sin(np.pi * j * u[None, :])
    if len(grid) < 4 * J + 1:
        raise ResolutionError(
            f"grid with {len(grid)} points is too coarse for J={J} "
            f"(need at least {4 * J + 1})"
        )
    return Basis(grid, weight, funcs, kind="fourier")


def estimate_covariance(ds: FunctionalDataset) -> np.ndarray:
    """Sample covariance kernel of centered curves on the grid.

    Entry (a, b) is the average over subjects of X_i(s_a) X_i(s_b).
    Requires centered data (column means below 1e-6); a single curve is
    taken as already centered, since its own profile is the only sample
    information available.
    """
    col_means = ds.curve_values.mean(axis=0)
    if ds.n > 1 and np.max(np.abs(col_means)) > 1e-6:
        raise DataError(
            "dataset is not centered; call center_dataset before "
            "estimating the covariance kernel"
        )
    K = ds.curve_values.T @ ds.curve_values / ds.n
    return 0.5 * (K + K.T)


def eigenbasis(
    K: np.ndarray,
    grid: TimeGrid,
    weight: WeightMeasure = None,
    J: int = None,
) -> Basis:
    """Top eigenfunctions of the integral operator with kernel K.

    The operator is discretized by the quadrature weights, symmetrized as
    W^(1/2) K W^(1/2) so the eigenproblem stays self-adjoint under the
    weighted inner product, and eigenvectors are mapped back by W^(-1/2).
    Signs are fixed so each eigenfunction integrates to a nonnegative
    value (largest-magnitude entry positive as the tie-break). Eigenvalues
    below 1e-10 of the largest are dropped.
    """
    K = np.asarray(K, dtype=float)
    m = len(grid)
    if K.shape != (m, m):
        raise DataError(f"kernel must be {m} x {m} to match the grid")
    if np.max(np.abs(K - K.T)) > 1e-8:
        raise DataError("kernel matrix is not symmetric")
    if weight is None:
        weight = WeightMeasure.uniform(grid)
    if J is None:
        J = m
    if not 1 <= J <= m:
        raise ValueError(f"J={J} outside 1..{m}")

    qw = quadrature_weights(grid, weight)
    support = qw > 0
    sq = np.sqrt(qw[support])
    B = sq[:, None] * K[np.ix_(support, support)] * sq[None, :]
    B = 0.5 * (B + B.T)
    eigvals, eigvecs = np.linalg.eigh(B)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]

    floor = EIGENVALUE_REL_FLOOR * max(eigvals[0], 0.0)
    keep = min(J, int(np.sum(eigvals > floor)))
    if keep < 1:
        raise DataError("kernel has no eigenvalue above the truncation floor")
    eigvals = eigvals[:keep]
    funcs = np.zeros((keep, m))
    funcs[:, support] = (eigvecs[:, :keep] / sq[:, None]).T

    for j in range(keep):
        total = float(np.dot(funcs[j], qw))
        if abs(total) >= 1e-10:
            if total < 0:
                funcs[j] = -funcs[j]
        elif funcs[j, np.argmax(np.abs(funcs[j]))] < 0:
            funcs[j] = -funcs[j]

    return Basis(grid, weight, funcs, kind="empirical", eigenvalues=eigvals)


def project_scores(ds: FunctionalDataset, basis: Basis, p: int) -> ScoreMatrix:
    """Inner products of each curve with the first p basis functions.

    Column 0 of the result is the intercept column of ones.
    """
    if not 1 <= p <= basis.size:
        raise ValueError(f"p={p} exceeds the basis size {basis.size}")
    if len(ds.grid) != len(basis.grid) or not np.array_equal(
        ds.grid.points, basis.grid.points
    ):
        raise DataError("dataset and basis live on different grids")
    qw = quadrature_weights(basis.grid, basis.weight)
    scores = (ds.curve_values * qw) @ basis.functions[:p].T
    out = np.empty((ds.n, p + 1))
    out[:, 0] = 1.0
    out[:, 1:] = scores
    return ScoreMatrix(out)


def reconstruct(coeffs, basis: Basis) -> tuple[float, Curve]:
    """Intercept and slope-function curve from a coefficient vector.

    coeffs[0] is the intercept; coeffs[1:] weight the basis functions.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    p = coeffs.size - 1
    if not 0 <= p <= basis.size:
        raise ValueError(f"{p} slope coefficients exceed the basis size {basis.size}")
    if p == 0:
        curve = np.zeros(len(basis.grid))
    else:
        curve = coeffs[1:] @ basis.functions[:p]
    return float(coeffs[0]), Curve(curve)


def save_basis(basis: Basis, path, eigenvalue_path=None) -> None:
    """Write basis functions as CSV columns aligned with the grid."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"rho{j}" for j in range(1, basis.size + 1)])
        for k, t in enumerate(basis.grid.points):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in basis.functions[:, k]])
    if basis.eigenvalues is not None and eigenvalue_path is not None:
        with open(eigenvalue_path, "w", encoding="utf-8") as fh:
            fh.write(",".join(repr(float(v)) for v in basis.eigenvalues) + "\n")


def load_basis(path, weight: WeightMeasure = None, eigenvalue_path=None, kind=None) -> Basis:
    """Read a basis written by save_basis."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if len(rows) < 3:
        raise DataError(f"{path}: too few rows for a basis file")
    body = np.asarray([[float(c) for c in row] for row in rows[1:]])
    grid = TimeGrid(body[:, 0])
    funcs = body[:, 1:].T
    if weight is None:
        weight = WeightMeasure.uniform(grid)
    eigenvalues = None
    if eigenvalue_path is not None:
        with open(eigenvalue_path, "r", encoding="utf-8") as fh:
            eigenvalues = np.asarray(
                [float(v) for v in fh.read().strip().split(",")]
            )
    if kind is None:
        kind = "empirical" if eigenvalues is not None else "fourier"
    return Basis(grid, weight, funcs, kind=kind, eigenvalues=eigenvalues)
