"""Pure-numpy implementations of the per-entry kernels.

These mirror ``_ckernels.pyx`` operation for operation. Element-wise
kernels agree bitwise with the compiled ones; reductions agree up to
summation order.
"""
import numpy as np


def shifted_soft_threshold(y, a, xi):
    d = y - a
    return a + np.sign(d) * np.maximum(np.abs(d) - xi, 0.0)


def prox_discrete_vec(y, alphabet, xi):
    out = np.array(y, dtype=np.float64, copy=True)
    # innermost prox is the last alphabet point
    for a in alphabet[::-1]:
        out = shifted_soft_threshold(out, a, xi)
    return out


def discrete_penalty_vec(v, alphabet):
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        return 0.0
    return float(sum(np.abs(v - a).sum() for a in alphabet))


def gather(X, rows, cols):
    return X[rows, cols]


def masked_sq_residual(X, rows, cols, vals):
    r = X[rows, cols] - vals
    return 0.5 * float(np.dot(r, r))


def lsp_prox(sigma, lam, theta):
    sigma = np.asarray(sigma, dtype=np.float64)
    out = np.zeros_like(sigma)
    disc = (sigma + theta) ** 2 - 4.0 * lam
    ok = disc >= 0.0
    root = np.zeros_like(sigma)
    root[ok] = 0.5 * ((sigma[ok] - theta) + np.sqrt(disc[ok]))
    ok &= root > 0.0
    s = root[ok]
    sg = sigma[ok]
    h_root = lam * np.log1p(s / theta) + 0.5 * (s - sg) ** 2
    h_zero = 0.5 * sg * sg
    keep = h_root < h_zero
    idx = np.flatnonzero(ok)[keep]
    out[idx] = s[keep]
    return out


def csr_matmat(indptr, idx, vals, W):
    """``S @ W`` for ``S`` in CSR form (``len(indptr) - 1`` rows)."""
    n_rows = indptr.shape[0] - 1
    out = np.zeros((n_rows, W.shape[1]))
    if vals.size == 0:
        return out
    prod = vals[:, None] * W[idx]
    nonempty = np.flatnonzero(indptr[1:] > indptr[:-1])
    out[nonempty] = np.add.reduceat(prod, indptr[:-1][nonempty], axis=0)
    return out
