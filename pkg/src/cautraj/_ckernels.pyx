# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the routines in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp

cnp.import_array()


def build_histogram(const cnp.uint16_t[:, ::1] binned, const double[::1] grad,
                    const cnp.intp_t[::1] rows, Py_ssize_t n_bins):
    cdef Py_ssize_t p = binned.shape[1]
    cdef Py_ssize_t m = rows.shape[0]
    gsum_arr = np.zeros((p, n_bins), dtype=np.float64)
    count_arr = np.zeros((p, n_bins), dtype=np.int64)
    cdef double[:, ::1] gsum = gsum_arr
    cdef cnp.int64_t[:, ::1] count = count_arr
    cdef Py_ssize_t ii, i, j, b
    cdef double g
    for ii in range(m):
        i = rows[ii]
        g = grad[i]
        for j in range(p):
            b = binned[i, j]
            gsum[j, b] += g
            count[j, b] += 1
    return gsum_arr, count_arr


def apply_tree(const double[:, :] X, const cnp.intp_t[::1] feature,
               const double[::1] threshold, const cnp.intp_t[::1] left,
               const cnp.intp_t[::1] right, const double[::1] value):
    cdef Py_ssize_t n = X.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, node, f
    for i in range(n):
        node = 0
        f = feature[0]
        while f >= 0:
            if X[i, f] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
            f = feature[node]
        out[i] = value[node]
    return out_arr


cdef double _theta_at(double xq, const double[::1] x, const double[::1] yt, const double[::1] tt,
                      Py_ssize_t n, double inv) noexcept nogil:
    cdef Py_ssize_t i
    cdef double z, k
    cdef double zmin = 1e300
    cdef double num = 0.0
    cdef double den = 0.0
    for i in range(n):
        z = (xq - x[i]) * inv
        if z * z < zmin:
            zmin = z * z
    for i in range(n):
        z = (xq - x[i]) * inv
        k = exp(-0.5 * (z * z - zmin))
        num = num + k * yt[i]
        den = den + k * tt[i]
    return num / den


def local_theta(const double[::1] xq, const double[::1] x, const double[::1] y_res,
                const double[::1] t_res, double bandwidth):
    cdef Py_ssize_t nq = xq.shape[0]
    cdef Py_ssize_t n = x.shape[0]
    out_arr = np.empty(nq, dtype=np.float64)
    cdef double[::1] out = out_arr
    yt_arr = np.multiply(y_res, t_res)
    tt_arr = np.multiply(t_res, t_res)
    cdef double[::1] yt = yt_arr
    cdef double[::1] tt = tt_arr
    cdef Py_ssize_t q
    cdef double inv = 1.0 / bandwidth
    # query points are independent, so they are split across threads
    for q in prange(nq, nogil=True, schedule="static"):
        out[q] = _theta_at(xq[q], x, yt, tt, n, inv)
    return out_arr
