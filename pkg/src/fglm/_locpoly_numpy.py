"""Pure numpy implementation of the local polynomial smoothing kernel.

Fallback used when the compiled extension is unavailable. Both backends
implement the same per-point algorithm: standardized weighted moments,
a closed-form normal-equation solve, and per-point bandwidth doubling
when the local data cannot support the fit.
"""

from __future__ import annotations

import numpy as np

KERNEL_EPANECHNIKOV = 0
KERNEL_GAUSSIAN = 1

_DET_REL_TOL = 1e-13
_CHUNK_ELEMENTS = 4_000_000


def _weights(u: np.ndarray, kernel_id: int) -> np.ndarray:
    if kernel_id == KERNEL_EPANECHNIKOV:
        w = 0.75 * (1.0 - u * u)
        return np.where(np.abs(u) < 1.0, w, 0.0)
    return np.exp(-0.5 * u * u)


def _solve_block(x, y, at_block, h, degree, kernel_id, deriv):
    """Fitted values (or nan) for one chunk of evaluation points."""
    u = (x[None, :] - at_block[:, None]) / h
    w = _weights(u, kernel_id)
    npos = np.count_nonzero(w > 0.0, axis=1)

    s0 = w.sum(axis=1)
    wu = w * u
    s1 = wu.sum(axis=1)
    wu2 = wu * u
    s2 = wu2.sum(axis=1)
    t0 = w @ y
    t1 = wu @ y

    out = np.full(at_block.size, np.nan)
    if degree == 1:
        det = s0 * s2 - s1 * s1
        ok = (npos >= 2) & (det > _DET_REL_TOL * s0 * s0)
        if deriv == 0:
            num = s2 * t0 - s1 * t1
        else:
            num = (s0 * t1 - s1 * t0) / h
        np.divide(num, det, out=out, where=ok)
        out[~ok] = np.nan
    else:
        s3 = (wu2 * u).sum(axis=1)
        s4 = (wu2 * u * u).sum(axis=1)
        t2 = wu2 @ y
        det = (
            s0 * (s2 * s4 - s3 * s3)
            - s1 * (s1 * s4 - s2 * s3)
            + s2 * (s1 * s3 - s2 * s2)
        )
        ok = (npos >= 3) & (det > _DET_REL_TOL * s0 * s0 * s0)
        if deriv == 0:
            num = (
                t0 * (s2 * s4 - s3 * s3)
                - s1 * (t1 * s4 - s3 * t2)
                + s2 * (t1 * s3 - s2 * t2)
            )
        else:
            num = (
                s0 * (t1 * s4 - s3 * t2)
                - t0 * (s1 * s4 - s2 * s3)
                + s2 * (s1 * t2 - t1 * s2)
            ) / h
        np.divide(num, det, out=out, where=ok)
        out[~ok] = np.nan
    return out


def locpoly(x, y, at, h0, degree, kernel_id, deriv, max_inflate):
    """Local polynomial fit at each evaluation point.

    Returns an array of fitted values (deriv=0) or first derivatives
    (deriv=1) plus the number of points left unfit after doubling the
    bandwidth max_inflate times.
    """
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    at = np.ascontiguousarray(at, dtype=float)
    out = np.full(at.size, np.nan)
    need = np.ones(at.size, dtype=bool)
    chunk = max(1, _CHUNK_ELEMENTS // max(x.size, 1))

    for inflate in range(max_inflate + 1):
        h = h0 * (2.0**inflate)
        idx = np.nonzero(need)[0]
        if idx.size == 0:
            break
        for start in range(0, idx.size, chunk):
            block = idx[start : start + chunk]
            vals = _solve_block(x, y, at[block], h, degree, kernel_id, deriv)
            good = np.isfinite(vals)
            out[block[good]] = vals[good]
            need[block[good]] = False
    return out, int(need.sum())
