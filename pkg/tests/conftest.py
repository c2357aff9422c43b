import os
from pathlib import Path

import numpy as np
import pytest

from discmc import kernels

ROOT = Path(__file__).resolve().parent.parent
MOVIELENS = Path(os.environ.get("DISCMC_MOVIELENS", ROOT / "data" / "ml-100k" / "u.data"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    """Run a test once per available kernel backend."""
    previous = kernels.BACKEND
    kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


@pytest.fixture(scope="session")
def movielens_path():
    if not MOVIELENS.exists():
        pytest.skip(f"MovieLens-100k not found at {MOVIELENS}; run scripts/fetch_movielens.py")
    return MOVIELENS


def eig_svd(A):
    """Reference SVD from the eigendecomposition of A^T A (independent of LAPACK gesdd)."""
    A = np.asarray(A, dtype=float)
    flip = A.shape[0] < A.shape[1]
    M = A.T if flip else A
    w, V = np.linalg.eigh(M.T @ M)
    order = np.argsort(w)[::-1]
    w, V = np.clip(w[order], 0, None), V[:, order]
    s = np.sqrt(w)
    U = np.zeros((M.shape[0], len(s)))
    nz = s > 1e-12 * max(1.0, s[0] if s.size else 1.0)
    U[:, nz] = (M @ V[:, nz]) / s[nz]
    if flip:
        U, V = V, U
    return U, s, V


def golden_min(fun, lo, hi, tol=1e-12):
    """Golden-section search for the minimizer of a unimodal scalar function."""
    invphi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def shifted_l1_oracle(y, a, xi):
    """argmin_u |u - a| + (u - y)^2 / (2 xi) by golden-section search."""
    if xi == 0:
        return y
    return golden_min(lambda u: abs(u - a) + (u - y) ** 2 / (2 * xi), y - 2 * xi - 1, y + 2 * xi + 1)


def lsp_oracle(sigma, lam, theta):
    """argmin_{s>=0} lam*log(1+s/theta) + (s-sigma)^2/2 by golden-section on each monotone piece."""
    h = lambda s: lam * np.log1p(s / theta) + 0.5 * (s - sigma) ** 2
    hi = max(sigma, 0.0) + 1.0
    # h is unimodal on [0, hi] except near the inflection; brute-force a grid to bracket
    grid = np.linspace(0.0, hi, 2001)
    k = int(np.argmin(h(grid)))
    lo_b, hi_b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    s = golden_min(h, lo_b, hi_b)
    return 0.0 if h(0.0) <= h(s) else s
