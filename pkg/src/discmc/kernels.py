"""Backend selection for the per-entry kernels.

The compiled extension is used when it imports; setting the environment
variable ``DISCMC_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["cython"] = _ckernels

if os.environ.get("DISCMC_PURE_PYTHON", "") not in ("", "0") or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = BACKENDS[BACKEND]


def use_backend(name):
    """Switch the active backend at runtime (``"python"`` or ``"cython"``)."""
    global BACKEND, _impl
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    BACKEND = name
    _impl = BACKENDS[name]


def _index(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def shifted_soft_threshold(y, a, xi):
    return _impl.shifted_soft_threshold(np.asarray(y, dtype=np.float64), float(a), float(xi))


def prox_discrete_vec(y, alphabet, xi):
    return _impl.prox_discrete_vec(
        np.asarray(y, dtype=np.float64), np.asarray(alphabet, dtype=np.float64), float(xi)
    )


def discrete_penalty_vec(v, alphabet):
    return float(_impl.discrete_penalty_vec(v, np.asarray(alphabet, dtype=np.float64)))


def gather(X, rows, cols):
    return _impl.gather(np.asarray(X, dtype=np.float64), _index(rows), _index(cols))


def masked_sq_residual(X, rows, cols, vals):
    return float(
        _impl.masked_sq_residual(
            np.asarray(X, dtype=np.float64),
            _index(rows),
            _index(cols),
            np.ascontiguousarray(vals, dtype=np.float64),
        )
    )


def lsp_prox(sigma, lam, theta):
    return _impl.lsp_prox(np.asarray(sigma, dtype=np.float64), float(lam), float(theta))


def csr_matmat(indptr, idx, vals, W):
    """Sparse (CSR) times dense: row ``i`` of the result is ``sum_p vals[p] * W[idx[p]]``."""
    return _impl.csr_matmat(
        _index(indptr), _index(idx), np.ascontiguousarray(vals, dtype=np.float64),
        np.ascontiguousarray(W, dtype=np.float64),
    )
