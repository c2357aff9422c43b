# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-entry kernels.

Element-wise kernels reproduce the numpy fallback bitwise: the same IEEE
operations are applied in the same order, only fused into one pass.
"""
import numpy as np

from libc.math cimport fabs, log1p, sqrt
from libc.stdint cimport int64_t


cdef inline double _shift_soft(double y, double a, double xi) noexcept nogil:
    cdef double d = y - a
    if d > xi:
        return a + (d - xi)
    if d < -xi:
        return a - (-d - xi)
    return a


def shifted_soft_threshold(y, double a, double xi):
    cdef double[::1] src = np.ascontiguousarray(y, dtype=np.float64).ravel()
    out = np.empty(src.shape[0], dtype=np.float64)
    cdef double[::1] dst = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(src.shape[0]):
            dst[i] = _shift_soft(src[i], a, xi)
    return out.reshape(np.shape(y))


def prox_discrete_vec(y, alphabet, double xi):
    cdef double[::1] src = np.ascontiguousarray(y, dtype=np.float64).ravel()
    cdef double[::1] alpha = np.ascontiguousarray(alphabet, dtype=np.float64)
    out = np.empty(src.shape[0], dtype=np.float64)
    cdef double[::1] dst = out
    cdef Py_ssize_t i, k
    cdef Py_ssize_t K = alpha.shape[0]
    cdef double v
    with nogil:
        for i in range(src.shape[0]):
            v = src[i]
            k = K - 1
            while k >= 0:
                v = _shift_soft(v, alpha[k], xi)
                k -= 1
            dst[i] = v
    return out.reshape(np.shape(y))


def discrete_penalty_vec(v, alphabet):
    cdef double[::1] src = np.ascontiguousarray(v, dtype=np.float64).ravel()
    cdef double[::1] alpha = np.ascontiguousarray(alphabet, dtype=np.float64)
    cdef Py_ssize_t i, k
    cdef double total = 0.0
    with nogil:
        for i in range(src.shape[0]):
            for k in range(alpha.shape[0]):
                total += fabs(src[i] - alpha[k])
    return total


def gather(const double[:, :] X, const int64_t[::1] rows, const int64_t[::1] cols):
    out = np.empty(rows.shape[0], dtype=np.float64)
    cdef double[::1] dst = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(rows.shape[0]):
            dst[i] = X[rows[i], cols[i]]
    return out


def masked_sq_residual(const double[:, :] X, const int64_t[::1] rows,
                       const int64_t[::1] cols, const double[::1] vals):
    cdef Py_ssize_t i
    cdef double r
    cdef double total = 0.0
    with nogil:
        for i in range(rows.shape[0]):
            r = X[rows[i], cols[i]] - vals[i]
            total += r * r
    return 0.5 * total


def lsp_prox(sigma, double lam, double theta):
    cdef double[::1] src = np.ascontiguousarray(sigma, dtype=np.float64).ravel()
    out = np.zeros(src.shape[0], dtype=np.float64)
    cdef double[::1] dst = out
    cdef Py_ssize_t i
    cdef double s, disc, root, h_root, h_zero
    with nogil:
        for i in range(src.shape[0]):
            s = src[i]
            disc = (s + theta) * (s + theta) - 4.0 * lam
            if disc < 0.0:
                continue
            root = 0.5 * ((s - theta) + sqrt(disc))
            if root <= 0.0:
                continue
            h_root = lam * log1p(root / theta) + 0.5 * (root - s) * (root - s)
            h_zero = 0.5 * s * s
            if h_root < h_zero:
                dst[i] = root
    return out


def csr_matmat(const int64_t[::1] indptr, const int64_t[::1] idx, const double[::1] vals, W):
    cdef const double[:, ::1] w = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t n_rows = indptr.shape[0] - 1
    cdef Py_ssize_t ncol = w.shape[1]
    out = np.zeros((n_rows, ncol), dtype=np.float64)
    cdef double[:, ::1] dst = out
    cdef Py_ssize_t i, p, c, j
    cdef double a
    with nogil:
        for i in range(n_rows):
            for p in range(indptr[i], indptr[i + 1]):
                a = vals[p]
                j = idx[p]
                for c in range(ncol):
                    dst[i, c] += a * w[j, c]
    return out
