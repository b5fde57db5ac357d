# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled local polynomial smoothing kernel.

Mirrors the numpy fallback exactly: standardized weighted moments per
evaluation point, closed-form normal equations for degree 1 or 2, and
per-point bandwidth doubling when the local data cannot support a fit.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport NAN, exp, fabs, isfinite

cnp.import_array()

KERNEL_EPANECHNIKOV = 0
KERNEL_GAUSSIAN = 1

cdef double _DET_REL_TOL = 1e-13


cdef inline double _fit_point(
    double a,
    double h,
    const double[::1] x,
    const double[::1] y,
    int n,
    int degree,
    int kernel_id,
    int deriv,
) nogil:
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0
    cdef double t0 = 0.0, t1 = 0.0, t2 = 0.0
    cdef double u, w, wu, wu2, det, num
    cdef int i, npos = 0

    for i in range(n):
        u = (x[i] - a) / h
        if kernel_id == 0:
            if fabs(u) >= 1.0:
                continue
            w = 0.75 * (1.0 - u * u)
        else:
            w = exp(-0.5 * u * u)
        if w > 0.0:
            npos += 1
        wu = w * u
        wu2 = wu * u
        s0 += w
        s1 += wu
        s2 += wu2
        t0 += w * y[i]
        t1 += wu * y[i]
        if degree == 2:
            s3 += wu2 * u
            s4 += wu2 * u * u
            t2 += wu2 * y[i]

    if degree == 1:
        if npos < 2:
            return NAN
        det = s0 * s2 - s1 * s1
        if det <= _DET_REL_TOL * s0 * s0:
            return NAN
        if deriv == 0:
            num = s2 * t0 - s1 * t1
        else:
            num = (s0 * t1 - s1 * t0) / h
        return num / det

    if npos < 3:
        return NAN
    det = (
        s0 * (s2 * s4 - s3 * s3)
        - s1 * (s1 * s4 - s2 * s3)
        + s2 * (s1 * s3 - s2 * s2)
    )
    if det <= _DET_REL_TOL * s0 * s0 * s0:
        return NAN
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
    return num / det


def locpoly(x, y, at, double h0, int degree, int kernel_id, int deriv, int max_inflate):
    """Local polynomial fit at each evaluation point.

    Returns an array of fitted values (deriv=0) or first derivatives
    (deriv=1) plus the number of points left unfit after doubling the
    bandwidth max_inflate times.
    """
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] av = np.ascontiguousarray(at, dtype=np.float64)
    cdef int n = xv.shape[0]
    cdef int k = av.shape[0]
    out_arr = np.full(k, np.nan, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef int j, inflate, n_fail = 0
    cdef double h, val

    with nogil:
        for j in range(k):
            val = NAN
            h = h0
            for inflate in range(max_inflate + 1):
                val = _fit_point(av[j], h, xv, yv, n, degree, kernel_id, deriv)
                if isfinite(val):
                    break
                h *= 2.0
            out[j] = val
            if not isfinite(val):
                n_fail += 1
    return out_arr, n_fail
