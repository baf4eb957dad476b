import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from conilay.eigensolve import (
    DENSE_CAP,
    ConvergenceError,
    DenseCapError,
    count_below,
    dense_oracle,
    eigenpairs_in_window,
    smallest_eigenpairs,
)


def _laplacian(n):
    h = np.pi / (n + 1)
    K = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr") / h**2
    return K, sp.identity(n, format="csr")


def test_finite_difference_laplacian():
    K, M = _laplacian(400)
    res = smallest_eigenpairs(K, M, 3)
    assert np.allclose(res.values, [1.0, 4.0, 9.0], atol=1e-3)
    assert res.meta["method"] == "block-lanczos"
    assert res.meta["inertia_count"] == 3


def _random_pencil(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    K = A @ A.T + n * np.eye(n)
    B = rng.standard_normal((n, n))
    M = B @ B.T / n + np.eye(n)
    return sp.csr_matrix(K), sp.csr_matrix(M)


def test_random_pencil_matches_dense():
    K, M = _random_pencil(50, 1)
    res = smallest_eigenpairs(K, M, 5)
    dense = dense_oracle(K, M)
    assert np.allclose(res.values, dense[:5], rtol=0, atol=1e-10 * dense[-1])


def test_larger_random_pencil_iterative():
    K, M = _random_pencil(300, 2)
    res = smallest_eigenpairs(K, M, 4)
    assert res.meta["method"] == "block-lanczos"
    dense = dense_oracle(K, M)
    assert np.max(np.abs(res.values - dense[:4]) / dense[:4]) < 1e-10


def test_identity_single_value():
    res = smallest_eigenpairs(sp.identity(100, format="csr"), sp.identity(100, format="csr"), 1)
    assert abs(res.values[0] - 1.0) < 1e-12


def test_dense_oracle_examples():
    assert np.allclose(dense_oracle(np.diag([2.0, 3.0]), np.eye(2)), [2.0, 3.0])
    assert np.allclose(dense_oracle(np.array([[1.0]]), np.array([[2.0]])), [0.5])
    with pytest.raises(DenseCapError):
        dense_oracle(sp.identity(DENSE_CAP + 1), sp.identity(DENSE_CAP + 1))


def test_shift_invariance_and_outputs():
    K, M = _laplacian(300)
    a = smallest_eigenpairs(K, M, 4)
    b = smallest_eigenpairs(K, M, 4, shift=0.5)
    assert np.allclose(a.values, b.values, rtol=1e-11)
    X = b.vectors
    assert np.allclose(X.T @ (M @ X), np.eye(4), atol=1e-10)
    rq = np.einsum("ij,ij->j", X, K @ X)
    assert np.allclose(rq, b.values, rtol=1e-11)
    assert np.all(b.residuals < 1e-6 * b.values)


def test_shift_above_eigenvalues_is_moved_down():
    K, M = _laplacian(300)
    res = smallest_eigenpairs(K, M, 2, shift=2.0)
    assert np.allclose(res.values, [1.0, 4.0], atol=1e-3)
    assert res.meta["shift"] < 1.0


def test_threshold_flags():
    K, M = _laplacian(300)
    res = smallest_eigenpairs(K, M, 4, threshold=5.0)
    assert list(res.below_threshold) == [True, True, False, False]
    assert len(res.usable()) == 2


def test_count_below():
    K, M = _laplacian(200)
    dense = dense_oracle(K, M)
    for sigma in (0.5, 2.0, 10.0, 50.5):
        assert count_below(K, M, sigma) == int(np.sum(dense < sigma))


def test_window_slicing():
    K, M = _laplacian(200)
    dense = dense_oracle(K, M)
    w = eigenpairs_in_window(K, M, 3.0, 30.0)
    assert np.allclose(w.values, dense[(dense >= 3.0) & (dense < 30.0)], rtol=1e-10)
    w2 = eigenpairs_in_window(K, M, 3.0, 200.0, max_count=4)  # recursive split
    assert np.allclose(w2.values, dense[(dense >= 3.0) & (dense < 200.0)], rtol=1e-10)
    assert len(eigenpairs_in_window(K, M, 1.5, 3.5).values) == 0
    with pytest.raises(ValueError):
        eigenpairs_in_window(K, M, 2.0, 2.0)


def test_clustered_spectrum_uses_slicing_fallback():
    # a tight cluster above the wanted pair forces the restart budget out
    n = 2000
    d = np.concatenate([[1.0, 1.0 + 1e-3], 2.0 + 1e-9 * np.arange(n - 2)])
    K = sp.diags(d, format="csr")
    M = sp.identity(n, format="csr")
    res = smallest_eigenpairs(K, M, 3, max_restarts=300)
    assert np.allclose(res.values, d[:3], atol=1e-9)


def test_invalid_k():
    K, M = _laplacian(20)
    with pytest.raises(ValueError):
        smallest_eigenpairs(K, M, 0)
    with pytest.raises(ValueError):
        smallest_eigenpairs(K, M, 21)


def test_convergence_error_carries_partial():
    K, M = _random_pencil(200, 5)
    with pytest.raises(ConvergenceError) as info:
        smallest_eigenpairs(K, M, 1, tol=1e-30, max_restarts=1)
    assert info.value.partial is not None


@given(st.lists(st.floats(0.1, 100.0), min_size=45, max_size=60, unique=True), st.integers(1, 5))
def test_property_diagonal_pencils(diag, k):
    d = np.array(diag)
    res = smallest_eigenpairs(sp.diags(d, format="csr"), sp.identity(len(d), format="csr"), k)
    assert np.allclose(res.values, np.sort(d)[:k], rtol=1e-9)
