# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled numerical hot kernels.

Signature-compatible with :mod:`structcorr.kernels_py`; the sampler inner
loop spends nearly all of its time in these routines (small Cholesky and
LU factorizations, quadratic forms), so they are written as plain C loops
over contiguous buffers.
"""

from libc.math cimport INFINITY, fabs, log, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"

cdef double LOG_2PI = 1.8378770664093453


cdef int _chol_inplace(double[:, ::1] a, double tol) nogil:
    # Lower Cholesky in place; returns -1 if any pivot (pre-sqrt) <= tol.
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= a[j, k] * a[j, k]
        if s <= tol:
            return -1
        s = sqrt(s)
        a[j, j] = s
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= a[i, k] * a[j, k]
            a[i, j] = s / a[j, j]
    return 0


cdef double _lu_det(double[:, ::1] a) nogil:
    # Determinant via LU with partial pivoting, in place.
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, k, piv
    cdef double big, tmp, det = 1.0
    for k in range(n):
        piv = k
        big = fabs(a[k, k])
        for i in range(k + 1, n):
            if fabs(a[i, k]) > big:
                big = fabs(a[i, k])
                piv = i
        if big == 0.0:
            return 0.0
        if piv != k:
            det = -det
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[piv, j]
                a[piv, j] = tmp
        det *= a[k, k]
        for i in range(k + 1, n):
            tmp = a[i, k] / a[k, k]
            a[i, k] = tmp
            for j in range(k + 1, n):
                a[i, j] -= tmp * a[k, j]
    return det


cdef void _gather(double[:, ::1] src, Py_ssize_t[:] idx, double[:, ::1] out) nogil:
    cdef Py_ssize_t d = idx.shape[0]
    cdef Py_ssize_t i, j
    for i in range(d):
        for j in range(d):
            out[i, j] = src[idx[i], idx[j]]


def try_cholesky(a, double tol=1e-10):
    """Lower Cholesky factor of ``a``, or None if any pivot is <= tol."""
    cdef cnp.ndarray[double, ndim=2] work = np.array(a, dtype=np.float64, order="C")
    if _chol_inplace(work, tol) != 0:
        return None
    cdef Py_ssize_t n = work.shape[0]
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(i + 1, n):
            work[i, j] = 0.0
    return work


def is_pd(a, double tol=1e-10):
    """Whether symmetric ``a`` factors with every Cholesky pivot > tol."""
    cdef cnp.ndarray[double, ndim=2] work = np.array(a, dtype=np.float64, order="C")
    return _chol_inplace(work, tol) == 0


def det_lu(a):
    """Determinant of a general square matrix."""
    cdef cnp.ndarray[double, ndim=2] work = np.array(a, dtype=np.float64, order="C")
    return float(_lu_det(work))


def barnard_coeffs(double[:, ::1] r, idx, Py_ssize_t i, Py_ssize_t j):
    """Quadratic coefficients (a, b, c) of det(sub(x)) = a x^2 + b x + c."""
    cdef cnp.ndarray[cnp.intp_t, ndim=1] ind = np.ascontiguousarray(idx, dtype=np.intp)
    cdef Py_ssize_t d = ind.shape[0]
    cdef cnp.ndarray[double, ndim=2] sub = np.empty((d, d), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] work = np.empty((d, d), dtype=np.float64)
    cdef double[:, ::1] sub_v = sub
    cdef double[:, ::1] work_v = work
    cdef Py_ssize_t[:] ind_v = ind
    cdef double dets[3]
    cdef double xs[3]
    cdef Py_ssize_t t, u, v
    xs[0] = 1.0
    xs[1] = -1.0
    xs[2] = 0.0
    with nogil:
        _gather(r, ind_v, sub_v)
        for t in range(3):
            for u in range(d):
                for v in range(d):
                    work_v[u, v] = sub_v[u, v]
            work_v[i, j] = xs[t]
            work_v[j, i] = xs[t]
            dets[t] = _lu_det(work_v)
    cdef double a = 0.5 * (dets[0] + dets[1]) - dets[2]
    cdef double b = 0.5 * (dets[0] - dets[1])
    return a, b, dets[2]


def mvn_pattern_loglik(double[:, ::1] sigma, idx, double[:, ::1] yc, double tol=1e-10):
    """Gaussian log-likelihood of centered rows ``yc`` under ``sigma[idx, idx]``."""
    cdef cnp.ndarray[cnp.intp_t, ndim=1] ind = np.ascontiguousarray(idx, dtype=np.intp)
    cdef Py_ssize_t d = ind.shape[0]
    cdef Py_ssize_t n = yc.shape[0]
    cdef cnp.ndarray[double, ndim=2] sub = np.empty((d, d), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] z = np.empty(d, dtype=np.float64)
    cdef double[:, ::1] sub_v = sub
    cdef double[:] z_v = z
    cdef Py_ssize_t[:] ind_v = ind
    cdef Py_ssize_t row, u, k
    cdef double s, quad = 0.0, logdet = 0.0
    cdef int status
    with nogil:
        _gather(sigma, ind_v, sub_v)
        status = _chol_inplace(sub_v, tol)
        if status == 0:
            for u in range(d):
                logdet += log(sub_v[u, u])
            logdet *= 2.0
            for row in range(n):
                # forward substitution: solve L z = yc[row]
                for u in range(d):
                    s = yc[row, u]
                    for k in range(u):
                        s -= sub_v[u, k] * z_v[k]
                    z_v[u] = s / sub_v[u, u]
                    quad += z_v[u] * z_v[u]
    if status != 0:
        return -INFINITY
    return -0.5 * (n * d * LOG_2PI + n * logdet + quad)
