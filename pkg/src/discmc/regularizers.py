"""Proximal operators and penalty values.

Low-rank side: singular value thresholding (nuclear norm) and the
log-sum penalty applied to singular values. Discrete side: the sum of
l1 distances of the unobserved entries to each alphabet point, whose
prox is computed as a chain of shifted soft-thresholds, one per point,
starting from the largest.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import ParameterError
from .linalg import SvdFactors, _as_matrix, thresholded_svd, vect

KINDS = ("nuclear", "lsp", "discrete")


@dataclass(frozen=True)
class Alphabet:
    """Finite set of admissible entry values, strictly increasing."""

    values: tuple

    def __init__(self, values):
        vals = tuple(float(v) for v in values)
        if not vals:
            raise ParameterError("alphabet must contain at least one value")
        if not all(np.isfinite(vals)):
            raise ParameterError("alphabet values must be finite")
        ordered = tuple(sorted(vals))
        if any(b <= a for a, b in zip(ordered, ordered[1:])):
            raise ParameterError(f"alphabet values must be distinct: {vals}")
        object.__setattr__(self, "values", ordered)

    @classmethod
    def integers(cls, lo, hi):
        return cls(range(lo, hi + 1))

    @classmethod
    def parse(cls, text):
        """From ``"1,2,3"`` or a range ``"1:5"`` (inclusive)."""
        text = text.strip()
        if ":" in text:
            lo, hi = text.split(":")
            return cls.integers(int(lo), int(hi))
        return cls(float(t) for t in text.split(",") if t.strip())

    @property
    def array(self):
        return np.array(self.values)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def nearest(self, x):
        """Round each entry of ``x`` to the closest value; ties go up."""
        x = np.asarray(x, dtype=np.float64)
        a = self.array
        hi = np.clip(np.searchsorted(a, x, side="left"), 0, len(a) - 1)
        lo = np.clip(hi - 1, 0, len(a) - 1)
        take_lo = (x - a[lo]) < (a[hi] - x)
        return np.where(take_lo, a[lo], a[hi])

    def __str__(self):
        return ",".join(f"{v:g}" for v in self.values)


@dataclass(frozen=True)
class RegularizerSpec:
    """Weights of the composite objective.

    ``kind`` selects the low-rank penalty: ``"lsp"`` uses the log-sum
    penalty, ``"nuclear"`` and ``"discrete"`` the nuclear norm. The
    discrete term is active whenever an alphabet is given and ``xi > 0``;
    ``kind="discrete"`` additionally requires the alphabet. ``lam=None``
    means "choose automatically" and is resolved by the solver.
    """

    kind: str = "nuclear"
    lam: float | None = None
    xi: float = 0.0
    theta: float = 1.0
    alphabet: Alphabet | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown regularizer kind {self.kind!r}")
        if self.lam is not None and not self.lam >= 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if not self.xi >= 0:
            raise ParameterError(f"xi must be >= 0, got {self.xi}")
        if not self.theta > 0:
            raise ParameterError(f"theta must be > 0, got {self.theta}")
        if self.kind == "discrete" and self.alphabet is None:
            raise ParameterError("discrete regularizer needs an alphabet")

    @property
    def low_rank(self):
        return "lsp" if self.kind == "lsp" else "nuclear"

    @property
    def discrete_active(self):
        return self.alphabet is not None and self.xi > 0


def _check_lambda(lam):
    if not lam >= 0:
        raise ParameterError(f"lambda must be >= 0, got {lam}")


def _check_theta(theta):
    if not theta > 0:
        raise ParameterError(f"theta must be > 0, got {theta}")


def _as_alphabet(alphabet):
    if isinstance(alphabet, Alphabet):
        return alphabet
    return Alphabet(alphabet)


def svt_factors(A, lam, k0=10, tol=1e-8, seed=0, init=None):
    """Factors of ``svt(A, lam)``, keeping only singular values ``> lam``."""
    _check_lambda(lam)
    f = thresholded_svd(A, lam, k0=k0, tol=tol, seed=seed, init=init)
    keep = int(np.count_nonzero(f.sigma > lam))
    return SvdFactors(f.u[:, :keep], f.sigma[:keep] - lam, f.v[:, :keep])


def svt(A, lam):
    """Singular value thresholding ``U (S - lam I)_+ V^T``."""
    A = _as_matrix(A)
    return svt_factors(A, lam).to_dense()


def nuclear_norm(A):
    A = _as_matrix(A)
    return float(np.linalg.svd(A, compute_uv=False).sum())


def discrete_penalty(X, S, alphabet):
    """Sum over alphabet points of the l1 distance of ``vect(X, S)`` to the point."""
    alphabet = _as_alphabet(alphabet)
    return kernels.discrete_penalty_vec(vect(X, S), alphabet.array)


def prox_shifted_l1(y, a, xi):
    """Prox of ``xi * ||u - a||_1``: soft-threshold about ``a``."""
    if not xi >= 0:
        raise ParameterError(f"xi must be >= 0, got {xi}")
    return kernels.shifted_soft_threshold(np.asarray(y, dtype=np.float64), a, xi)


def prox_discrete(Y, S, alphabet, xi):
    """Apply ``prox_shifted_l1`` for each alphabet point, largest first, on ``S``.

    Entries outside ``S`` are copied through unchanged.
    """
    alphabet = _as_alphabet(alphabet)
    if not xi >= 0:
        raise ParameterError(f"xi must be >= 0, got {xi}")
    Y = _as_matrix(Y)
    out = np.array(Y, copy=True)
    if xi == 0 or len(S) == 0:
        return out
    flat = out.reshape(-1)
    flat[S.linear] = kernels.prox_discrete_vec(vect(Y, S), alphabet.array, xi)
    return out


def lsp_value(sigma, theta):
    """Log-sum penalty ``sum(log(1 + sigma / theta))``."""
    _check_theta(theta)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma < 0):
        raise ParameterError("singular values must be non-negative")
    return float(np.log1p(sigma / theta).sum())


def lsp_prox_scalar(sigma, lam, theta):
    """Element-wise minimizer of ``lam*log(1 + s/theta) + (s - sigma)^2 / 2`` over ``s >= 0``.

    The candidates are ``s = 0`` and the larger root of
    ``s^2 + (theta - sigma) s + (lam - sigma theta) = 0``; ties pick 0.
    """
    _check_lambda(lam)
    _check_theta(theta)
    return kernels.lsp_prox(sigma, lam, theta)


@lru_cache(maxsize=64)
def lsp_threshold(lam, theta):
    """Largest ``sigma`` that the LSP prox still maps to zero."""
    _check_lambda(lam)
    _check_theta(theta)
    if lam == 0:
        return 0.0
    lo, hi = 0.0, lam / theta + 2.0 * np.sqrt(lam) + theta
    while kernels.lsp_prox([hi], lam, theta)[0] == 0.0:
        lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if kernels.lsp_prox([mid], lam, theta)[0] == 0.0:
            lo = mid
        else:
            hi = mid
    return lo


def lsp_prox_factors(A, lam, theta, k0=10, tol=1e-8, seed=0, init=None):
    """Factors of ``prox_lsp_sv(A, lam, theta)`` with zero singular values dropped."""
    _check_lambda(lam)
    _check_theta(theta)
    f = thresholded_svd(A, lsp_threshold(lam, theta), k0=k0, tol=tol, seed=seed, init=init)
    s = kernels.lsp_prox(f.sigma, lam, theta)
    keep = int(np.count_nonzero(s > 0))
    return SvdFactors(f.u[:, :keep], s[:keep], f.v[:, :keep])


def prox_lsp_sv(A, lam, theta):
    """Log-sum penalty prox applied to the singular values of ``A``."""
    A = _as_matrix(A)
    return lsp_prox_factors(A, lam, theta).to_dense()
