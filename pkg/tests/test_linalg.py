import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import eig_svd
from discmc import (
    ConvergenceError,
    DimensionError,
    IndexSet,
    ObservedMatrix,
    ParameterError,
    grad_f,
    mask,
    masked_residual_sq,
    truncated_svd,
    vect,
    vect_inv,
)
from discmc.linalg import thresholded_svd


def random_index_set(rng, shape, frac=0.5):
    return IndexSet.from_mask(rng.random(shape) < frac)


def random_observed(rng, shape, frac=0.5):
    S = random_index_set(rng, shape, frac)
    return ObservedMatrix(shape, S.rows, S.cols, rng.normal(size=len(S)))


# ---- IndexSet / ObservedMatrix --------------------------------------------

def test_index_set_canonical_order_and_dedup():
    S = IndexSet.from_pairs((2, 3), [1, 0, 0, 1], [0, 2, 2, 1])
    assert list(S) == [(0, 2), (1, 0), (1, 1)]
    assert len(S) == 3
    assert (0, 2) in S and (0, 0) not in S and (5, 5) not in S


def test_index_set_out_of_bounds():
    with pytest.raises(DimensionError):
        IndexSet.from_pairs((2, 2), [2], [0])


def test_complement_involution(rng):
    S = random_index_set(rng, (7, 5))
    assert S.complement().complement() == S
    assert S.isdisjoint(S.complement())
    assert S.union(S.complement()) == IndexSet.full((7, 5))


def test_observed_rejects_duplicates_and_nonfinite():
    with pytest.raises(ParameterError):
        ObservedMatrix((2, 2), [0, 0], [1, 1], [1.0, 2.0])
    with pytest.raises(ParameterError):
        ObservedMatrix((2, 2), [0], [1], [np.nan])


def test_observed_row_offsets(rng):
    O = random_observed(rng, (6, 4), 0.6)
    for i in range(6):
        cols, vals = O.row(i)
        ref = [(j, v) for (r, j, v) in O.triplets() if r == i]
        assert list(zip(cols.tolist(), vals.tolist())) == ref
    assert O.indptr[-1] == len(O)


# ---- mask / vect / vect_inv -----------------------------------------------

def test_mask_examples(rng):
    A = rng.normal(size=(3, 4))
    assert np.array_equal(mask(A, IndexSet.full(A.shape)), A)
    assert np.array_equal(mask(A, IndexSet.empty(A.shape)), np.zeros_like(A))
    S = IndexSet.from_pairs((2, 2), [0, 1], [0, 1])
    assert np.array_equal(mask([[1, 2], [3, 4]], S), [[1, 0], [0, 4]])


def test_mask_shape_mismatch():
    with pytest.raises(DimensionError):
        mask(np.zeros((2, 3)), IndexSet.full((3, 2)))


def test_vect_examples():
    S = IndexSet.from_pairs((2, 2), [0, 1], [1, 0])
    assert vect([[1, 2], [3, 4]], S).tolist() == [2, 3]
    assert vect(np.eye(2), IndexSet.empty((2, 2))).size == 0
    assert np.array_equal(vect_inv([2, 3], S), [[0, 2], [3, 0]])
    assert np.array_equal(vect_inv([], IndexSet.empty((2, 2))), np.zeros((2, 2)))


def test_vect_inv_length_mismatch():
    with pytest.raises(DimensionError):
        vect_inv([1.0, 2.0], IndexSet.from_pairs((2, 2), [0], [0]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_mask_vect_properties(m, n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(m, n))
    S = random_index_set(rng, (m, n), rng.random())
    Sc = S.complement()
    M = mask(A, S)
    assert np.array_equal(mask(M, S), M)
    assert np.array_equal(M + mask(A, Sc), A)
    assert np.array_equal(vect_inv(vect(A, S), S), M)
    v = rng.normal(size=len(S))
    assert np.array_equal(vect(vect_inv(v, S), S), v)


# ---- f and its gradient ---------------------------------------------------

def test_masked_residual_examples(backend):
    O = ObservedMatrix((2, 2), [0], [0], [2.0])
    assert masked_residual_sq(np.zeros((2, 2)), O) == 2.0
    assert masked_residual_sq(O.dense, O) == 0.0
    g = grad_f(np.zeros((2, 2)), O)
    assert np.array_equal(g, [[-2.0, 0.0], [0.0, 0.0]])
    assert np.array_equal(grad_f(O.dense, O), np.zeros((2, 2)))


def test_masked_residual_matches_dense(rng, backend):
    O = random_observed(rng, (5, 4))
    X = rng.normal(size=(5, 4))
    dense = 0.5 * np.sum((O.index_set.mask * (X - O.dense)) ** 2)
    assert abs(masked_residual_sq(X, O) - dense) <= 1e-12


def test_masked_residual_shape_mismatch(rng):
    O = random_observed(rng, (5, 4))
    with pytest.raises(DimensionError):
        masked_residual_sq(np.zeros((4, 5)), O)
    with pytest.raises(DimensionError):
        grad_f(np.zeros((4, 5)), O)


def test_grad_matches_finite_differences(rng, backend):
    h = 1e-6
    for _ in range(5):
        O = random_observed(rng, (6, 5))
        X = rng.normal(size=(6, 5))
        D = rng.normal(size=(6, 5))
        fd = (masked_residual_sq(X + h * D, O) - masked_residual_sq(X - h * D, O)) / (2 * h)
        an = np.sum(grad_f(X, O) * D)
        assert abs(fd - an) <= 1e-5 * max(1.0, abs(an))


def test_grad_supported_on_omega(rng):
    O = random_observed(rng, (6, 5))
    g = grad_f(rng.normal(size=(6, 5)), O)
    assert np.array_equal(mask(g, O.index_set.complement()), np.zeros((6, 5)))


def test_residual_nonnegative_zero_iff_fit(rng):
    O = random_observed(rng, (6, 5))
    X = rng.normal(size=(6, 5))
    assert masked_residual_sq(X, O) > 0
    X_fit = X.copy()
    X_fit[O.rows, O.cols] = O.values
    assert masked_residual_sq(X_fit, O) == 0.0


# ---- truncated SVD --------------------------------------------------------

def test_truncated_svd_diagonal():
    f = truncated_svd(np.diag([3.0, 1.0, 0.0]), 2)
    assert np.allclose(f.sigma, [3.0, 1.0], atol=1e-12)


def test_truncated_svd_rank5_matches_oracle(rng):
    A = rng.normal(size=(20, 5)) @ rng.normal(size=(5, 15))
    f = truncated_svd(A, 5)
    assert np.linalg.norm(f.to_dense() - A) <= 1e-8
    _, s, _ = eig_svd(A)
    assert np.allclose(f.sigma, s[:5], atol=1e-8)


def test_truncated_svd_full_k(rng):
    A = rng.normal(size=(9, 6))
    f = truncated_svd(A, 6)
    _, s, _ = eig_svd(A)
    assert np.max(np.abs(f.sigma - s)) <= 1e-8


@pytest.mark.parametrize("shape,k", [((200, 150), 12), ((150, 300), 20)])
def test_truncated_svd_randomized_path(rng, shape, k):
    # decaying spectrum, so the randomized branch converges to tight tolerance
    m, n = shape
    U, _ = np.linalg.qr(rng.normal(size=(m, min(m, n))))
    V, _ = np.linalg.qr(rng.normal(size=(n, min(m, n))))
    s = 100.0 * 0.7 ** np.arange(min(m, n))
    A = (U * s) @ V.T
    f = truncated_svd(A, k, tol=1e-10)
    assert np.allclose(f.sigma, s[:k], rtol=1e-8)
    assert np.allclose(f.u.T @ f.u, np.eye(k), atol=1e-8)
    assert np.allclose(f.v.T @ f.v, np.eye(k), atol=1e-8)
    best = (U[:, :k] * s[:k]) @ V[:, :k].T
    assert np.linalg.norm(f.to_dense() - best) <= 1e-8 * s[0]


def test_truncated_svd_properties(rng):
    for _ in range(10):
        A = rng.normal(size=(rng.integers(2, 30), rng.integers(2, 30)))
        k = int(rng.integers(1, min(A.shape) + 1))
        f = truncated_svd(A, k)
        assert np.all(np.diff(f.sigma) <= 0) and np.all(f.sigma >= 0)
        assert np.allclose(f.u.T @ f.u, np.eye(k), atol=1e-8)
        assert np.allclose(f.v.T @ f.v, np.eye(k), atol=1e-8)


def test_truncated_svd_k_out_of_range():
    with pytest.raises(ParameterError):
        truncated_svd(np.eye(3), 0)
    with pytest.raises(ParameterError):
        truncated_svd(np.eye(3), 4)


def test_truncated_svd_convergence_error_carries_factors(rng):
    # flat spectrum: subspace iteration cannot separate the top-k triplets
    A = rng.normal(size=(300, 200))
    with pytest.raises(ConvergenceError) as info:
        truncated_svd(A, 10, tol=1e-14, max_power_iters=3)
    f = info.value.result
    assert f is not None and f.sigma.shape == (10,)


def test_thresholded_svd_captures_everything_above(rng):
    A = rng.normal(size=(150, 120))
    s = np.linalg.svd(A, compute_uv=False)
    thr = s[30]
    f = thresholded_svd(A, thr)
    assert np.count_nonzero(f.sigma > thr) == np.count_nonzero(s > thr)
    assert np.allclose(f.sigma[f.sigma > thr], s[s > thr], rtol=1e-6)
