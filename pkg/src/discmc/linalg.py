"""Masking, vectorization and truncated SVD primitives.

Dense matrices are plain 2-D ``float64`` numpy arrays. Index sets and
observed matrices are immutable and store positions as sorted row-major
linear indices, which is the canonical (lexicographic) order used by
:func:`vect` and :func:`vect_inv`.
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import kernels
from .errors import ConvergenceError, DimensionError, ParameterError

#: matrices whose smaller side is at most this size use LAPACK directly
DENSE_SVD_CUTOFF = 64


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _as_matrix(A):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got {A.ndim}-D")
    return A


class IndexSet:
    """A set of ``(i, j)`` positions inside a fixed ``shape``."""

    __slots__ = ("shape", "linear", "__dict__")

    def __init__(self, shape, linear):
        m, n = (int(s) for s in shape)
        if m < 0 or n < 0:
            raise DimensionError(f"invalid shape {shape}")
        lin = np.unique(np.asarray(linear, dtype=np.int64).ravel())
        if lin.size and (lin[0] < 0 or lin[-1] >= m * n):
            raise DimensionError(f"index out of bounds for shape {(m, n)}")
        self.shape = (m, n)
        self.linear = _frozen(lin, np.int64)

    @classmethod
    def from_pairs(cls, shape, rows, cols):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if rows.shape != cols.shape:
            raise DimensionError("rows and cols differ in length")
        m, n = shape
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise DimensionError(f"index out of bounds for shape {tuple(shape)}")
        return cls(shape, rows * n + cols)

    @classmethod
    def from_mask(cls, mask):
        mask = np.asarray(mask, dtype=bool)
        return cls(mask.shape, np.flatnonzero(mask))

    @classmethod
    def full(cls, shape):
        return cls(shape, np.arange(shape[0] * shape[1]))

    @classmethod
    def empty(cls, shape):
        return cls(shape, [])

    @cached_property
    def rows(self):
        return _frozen(self.linear // self.shape[1] if self.shape[1] else self.linear, np.int64)

    @cached_property
    def cols(self):
        return _frozen(self.linear % self.shape[1] if self.shape[1] else self.linear, np.int64)

    @cached_property
    def mask(self):
        """Boolean ``shape`` array, True on members."""
        out = np.zeros(self.shape[0] * self.shape[1], dtype=bool)
        out[self.linear] = True
        out = out.reshape(self.shape)
        out.setflags(write=False)
        return out

    @cached_property
    def _complement(self):
        return IndexSet(self.shape, np.flatnonzero(~self.mask.ravel()))

    def complement(self):
        return self._complement

    def __len__(self):
        return int(self.linear.size)

    def __iter__(self):
        return zip(self.rows.tolist(), self.cols.tolist())

    def __contains__(self, pair):
        i, j = pair
        m, n = self.shape
        if not (0 <= i < m and 0 <= j < n):
            return False
        k = i * n + j
        pos = np.searchsorted(self.linear, k)
        return bool(pos < self.linear.size and self.linear[pos] == k)

    def __eq__(self, other):
        return (
            isinstance(other, IndexSet)
            and self.shape == other.shape
            and np.array_equal(self.linear, other.linear)
        )

    def __hash__(self):
        return hash((self.shape, self.linear.tobytes()))

    def isdisjoint(self, other):
        return np.intersect1d(self.linear, other.linear, assume_unique=True).size == 0

    def union(self, other):
        if self.shape != other.shape:
            raise DimensionError("index sets live in different shapes")
        return IndexSet(self.shape, np.union1d(self.linear, other.linear))

    def __repr__(self):
        return f"IndexSet(shape={self.shape}, size={len(self)})"


class ObservedMatrix:
    """Partially observed matrix: ``(i, j, value)`` triplets over a known shape.

    Triplets are kept sorted in canonical order, with per-row offsets
    (``indptr``) so that row-wise access is O(1) to locate.
    """

    __slots__ = ("shape", "index_set", "values", "__dict__")

    def __init__(self, shape, rows, cols, values):
        shape = (int(shape[0]), int(shape[1]))
        if shape[0] < 1 or shape[1] < 1:
            raise DimensionError(f"observed matrix needs a positive shape, got {shape}")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        if not rows.shape == cols.shape == values.shape:
            raise DimensionError("rows, cols and values differ in length")
        if not np.all(np.isfinite(values)):
            raise ParameterError("observed values must be finite")
        m, n = shape
        if rows.size and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
            raise DimensionError(f"index out of bounds for shape {shape}")
        lin = rows * n + cols
        order = np.argsort(lin, kind="stable")
        lin = lin[order]
        if lin.size > 1 and np.any(lin[1:] == lin[:-1]):
            raise ParameterError("duplicate (i, j) observation")
        self.shape = shape
        self.index_set = IndexSet(shape, lin)
        self.values = _frozen(values[order], np.float64)

    @classmethod
    def from_dense(cls, A, S):
        A = _as_matrix(A)
        _check_shape(A, S)
        return cls(S.shape, S.rows, S.cols, vect(A, S))

    @property
    def rows(self):
        return self.index_set.rows

    @property
    def cols(self):
        return self.index_set.cols

    @cached_property
    def indptr(self):
        counts = np.bincount(self.rows, minlength=self.shape[0])
        ptr = np.concatenate([[0], np.cumsum(counts)])
        return _frozen(ptr, np.int64)

    @cached_property
    def col_order(self):
        """Permutation listing the observations column by column (rows ascending)."""
        return _frozen(np.argsort(self.cols, kind="stable"), np.int64)

    @cached_property
    def col_indptr(self):
        counts = np.bincount(self.cols, minlength=self.shape[1])
        return _frozen(np.concatenate([[0], np.cumsum(counts)]), np.int64)

    def row(self, i):
        """``(cols, values)`` of the observations in row ``i``."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.cols[lo:hi], self.values[lo:hi]

    def triplets(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()))

    @cached_property
    def dense(self):
        """``P_Omega(O)`` as a dense read-only matrix."""
        out = vect_inv(self.values, self.index_set)
        out.setflags(write=False)
        return out

    def __len__(self):
        return len(self.index_set)

    def __repr__(self):
        return f"ObservedMatrix(shape={self.shape}, nnz={len(self)})"


@dataclass(frozen=True)
class SvdFactors:
    """Thin factorization ``u @ diag(sigma) @ v.T``."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self):
        return int(np.count_nonzero(self.sigma > 0))

    def to_dense(self):
        return (self.u * self.sigma) @ self.v.T

    def truncate(self, k):
        return SvdFactors(self.u[:, :k], self.sigma[:k], self.v[:, :k])


class SparsePlusLowRank:
    """Implicit matrix ``P_Omega(R) + u @ diag(sigma) @ v.T``.

    The sparse part lives on the positions of ``pattern`` (an
    :class:`ObservedMatrix`; only its positions are used) with entries
    ``values`` in canonical order. Products with dense blocks cost
    ``O((nnz + (m + n) r) * cols)`` instead of ``O(m n cols)``, which is
    what makes imputed iterates cheap to feed to :func:`truncated_svd`.
    The factors need not be orthonormal.
    """

    def __init__(self, pattern, values, u, sigma, v):
        values = np.ascontiguousarray(values, dtype=np.float64)
        if values.shape != (len(pattern),):
            raise DimensionError(f"{values.size} sparse values for {len(pattern)} positions")
        m, n = pattern.shape
        u, v = np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)
        sigma = np.asarray(sigma, dtype=np.float64)
        if u.shape != (m, sigma.size) or v.shape != (n, sigma.size):
            raise DimensionError("low-rank factors do not match the pattern shape")
        self.pattern, self.values = pattern, values
        self.u, self.sigma, self.v = u, sigma, v
        self.shape = (m, n)

    @property
    def T(self):
        return _Adjoint(self)

    def __matmul__(self, W):
        p = self.pattern
        out = kernels.csr_matmat(p.indptr, p.cols, self.values, W)
        if self.sigma.size:
            out += self.u @ (self.sigma[:, None] * (self.v.T @ W))
        return out

    def rmatmat(self, W):
        """``self.T @ W``."""
        p = self.pattern
        perm = p.col_order
        out = kernels.csr_matmat(p.col_indptr, p.rows[perm], self.values[perm], W)
        if self.sigma.size:
            out += self.v @ (self.sigma[:, None] * (self.u.T @ W))
        return out

    def to_dense(self):
        out = (self.u * self.sigma) @ self.v.T
        out[self.pattern.rows, self.pattern.cols] += self.values
        return out


class _Adjoint:
    def __init__(self, op):
        self.op = op
        self.shape = op.shape[::-1]

    @property
    def T(self):
        return self.op

    def __matmul__(self, W):
        return self.op.rmatmat(W)


def _as_operand(A):
    return A if isinstance(A, SparsePlusLowRank) else _as_matrix(A)


def _densify(A):
    return A.to_dense() if isinstance(A, SparsePlusLowRank) else A


def _check_shape(A, S):
    if tuple(A.shape) != tuple(S.shape):
        raise DimensionError(f"matrix shape {A.shape} does not match index set shape {S.shape}")


def mask(A, S):
    """Keep entries of ``A`` on ``S``, zero elsewhere."""
    A = _as_matrix(A)
    _check_shape(A, S)
    return np.where(S.mask, A, 0.0)


def vect(A, S):
    """Entries of ``A`` on ``S`` in canonical order."""
    A = _as_matrix(A)
    _check_shape(A, S)
    return A.ravel()[S.linear]


def vect_inv(v, S):
    """Scatter ``v`` onto the positions of ``S``; zeros elsewhere."""
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != len(S):
        raise DimensionError(f"vector of length {v.size} for index set of size {len(S)}")
    out = np.zeros(S.shape[0] * S.shape[1])
    out[S.linear] = v
    return out.reshape(S.shape)


def masked_residual_sq(X, O):
    """``0.5 * ||P_Omega(X - O)||_F^2``, summed over observed entries only."""
    X = _as_matrix(X)
    _check_shape(X, O)
    return kernels.masked_sq_residual(X, O.rows, O.cols, O.values)


def grad_f(X, O):
    """Gradient of :func:`masked_residual_sq`, i.e. ``P_Omega(X - O)``."""
    X = _as_matrix(X)
    _check_shape(X, O)
    out = np.zeros(O.shape)
    out[O.rows, O.cols] = kernels.gather(X, O.rows, O.cols) - O.values
    return out


def _dense_svd(A, k):
    u, s, vt = np.linalg.svd(_densify(A), full_matrices=False)
    return SvdFactors(u[:, :k], s[:k], vt[:k].T.copy())


def _orth(Y):
    q, _ = np.linalg.qr(Y)
    return q


def _use_dense(p, ell):
    return p <= DENSE_SVD_CUTOFF or 2 * ell >= p


def truncated_svd(A, k, tol=1e-8, *, oversample=8, power_iters=2, max_power_iters=50,
                  seed=0, init=None, above=None):
    """Top-``k`` singular triplets of ``A``.

    Small problems (``min(m, n) <= DENSE_SVD_CUTOFF``, or a sketch covering
    at least half the smaller side) go straight to LAPACK. Otherwise a
    randomized range finder is refined by subspace iteration with QR
    re-orthonormalization: ``power_iters`` passes are always made, then
    passes continue until ``||A V - U diag(sigma)||_F <= tol * max(1, sigma_1)``
    or ``max_power_iters`` is reached.

    Parameters
    ----------
    A : (m, n) array or SparsePlusLowRank
    k : int
        Number of triplets, ``1 <= k <= min(m, n)``.
    tol : float
        Relative residual tolerance.
    seed : int
        Seed of the Gaussian test matrix.
    init : (n, j) array, optional
        Right vectors used to warm-start the sketch (e.g. the previous
        iterate's factors); padded with Gaussian columns to ``k + oversample``.
    above : float, optional
        Only triplets with ``sigma > above`` enter the residual test.

    Raises
    ------
    ConvergenceError
        With the best-effort :class:`SvdFactors` attached as ``result``.
    """
    A = _as_operand(A)
    m, n = A.shape
    p = min(m, n)
    if not 1 <= k <= p:
        raise ParameterError(f"k={k} outside [1, {p}]")
    ell = min(k + oversample, p)
    if _use_dense(p, ell):
        return _dense_svd(A, k)

    rng = np.random.default_rng(seed)
    omega = rng.standard_normal((n, ell))
    if init is not None:
        init = np.asarray(init, dtype=np.float64)[:, :ell]
        omega[:, : init.shape[1]] = init
    Y = A @ omega

    # Each pass: Q = orth(Y), Rayleigh-Ritz on Q^T A (its SVD also
    # orthonormalizes the right side), then Y = A V is both the residual
    # test and the next range sketch.
    factors = None
    scale = 1.0
    for it in range(max_power_iters + 1):
        Q = _orth(Y)
        # SVD of the wide Q^T A through a thin QR of its tall transpose
        qb, rb = np.linalg.qr(A.T @ Q)
        w, s, ubt = np.linalg.svd(rb)
        ub, V = ubt.T, qb @ w
        Y = A @ V
        if it < power_iters:
            continue
        u = Q @ ub[:, :k]
        factors = SvdFactors(u, s[:k], V[:, :k].copy())
        scale = max(1.0, float(s[0]))
        j = k if above is None else int(np.count_nonzero(s[:k] > above))
        resid = np.linalg.norm(Y[:, :j] - u[:, :j] * s[:j])
        if resid <= tol * scale:
            return factors
    raise ConvergenceError(
        f"truncated_svd: residual {resid:.3e} above {tol * scale:.3e} after "
        f"{max_power_iters} power passes",
        result=factors,
    )


def thresholded_svd(A, threshold, k0=10, tol=1e-8, seed=0, init=None, max_power_iters=10):
    """Truncated SVD holding every triplet with ``sigma > threshold``, plus one.

    Starts at ``k0`` triplets and grows ``k`` by 50% while the smallest
    computed singular value still exceeds ``threshold``. Only triplets
    above the threshold must meet ``tol``. Once the sketch would cover half
    of the smaller side, or subspace iteration fails to converge, one exact
    LAPACK SVD is used instead.
    """
    A = _as_operand(A)
    p = min(A.shape)
    k = max(1, min(int(k0), p))

    def exact():
        f = _dense_svd(A, p)
        return f.truncate(min(p, int(np.count_nonzero(f.sigma > threshold)) + 1))

    while True:
        if _use_dense(p, min(k + 8, p)):
            return exact()
        try:
            f = truncated_svd(A, k, tol=tol, seed=seed, init=init, above=threshold,
                              max_power_iters=max_power_iters)
        except ConvergenceError:
            return exact()
        if f.sigma[-1] <= threshold:
            return f
        k = min(p, max(k + 1, int(np.ceil(1.5 * k))))
        init = f.v
