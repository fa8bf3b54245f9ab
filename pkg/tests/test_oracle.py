import numpy as np
import pytest

from specrec.oracle import (
    dense_eig,
    greedy_match,
    naive_M,
    naive_partial_trace,
    naive_ptm,
)
from specrec.overcomplete import fast_matvec_M
from specrec.tensor_core import Tensor3


def test_dense_eig_diagonal():
    rep = dense_eig(np.diag([5.0, 2.0, -1.0]))
    np.testing.assert_allclose(rep.eigenvalues, [5.0, 2.0, -1.0], atol=1e-12)
    np.testing.assert_allclose(np.abs(rep.eigenvectors), np.eye(3), atol=1e-12)


def test_dense_eig_2x2_offdiag():
    rep = dense_eig(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(rep.eigenvalues, [1.0, -1.0], atol=1e-12)


def test_dense_eig_trace_identities():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((16, 16))
    a = a + a.T
    rep = dense_eig(a)
    assert abs(np.sum(rep.eigenvalues) - np.trace(a)) <= 1e-10
    assert abs(np.sum(rep.eigenvalues**2) - np.linalg.norm(a) ** 2) <= 1e-10
    # eigenpair residuals and orthonormality
    for i in range(16):
        resid = a @ rep.eigenvectors[:, i] - rep.eigenvalues[i] * rep.eigenvectors[:, i]
        assert np.linalg.norm(resid) <= 1e-8 * np.max(np.abs(rep.eigenvalues))
    gram = rep.eigenvectors.T @ rep.eigenvectors
    np.testing.assert_allclose(gram, np.eye(16), atol=1e-8)


def test_dense_eig_rejects_asymmetric():
    with pytest.raises(ValueError):
        dense_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_naive_M_rank_one():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(3)
    g = rng.standard_normal(3)
    m = naive_M([a], g)
    x = np.kron(a, a)
    expected = float(g @ a) * np.linalg.norm(a) ** 4 * np.outer(x, x)
    np.testing.assert_allclose(m, expected, atol=1e-12)


def test_naive_M_symmetric_exactly():
    rng = np.random.default_rng(2)
    comps = list(rng.standard_normal((3, 4)) / 2.0)
    m = naive_M(comps, rng.standard_normal(4))
    assert np.max(np.abs(m - m.T)) == 0.0


def test_naive_M_guard():
    with pytest.raises(ValueError):
        naive_M([np.zeros(60)], np.zeros(60))


def test_naive_M_matches_fast_matvec():
    rng = np.random.default_rng(3)
    d, n = 4, 3
    comps = rng.standard_normal((n, d)) / np.sqrt(d)
    g = rng.standard_normal(d)
    t_flat = np.einsum("li,lj,lk->ijk", comps, comps, comps).reshape(d, d * d)
    m = naive_M(list(comps), g)
    for k in range(10):
        v = rng.standard_normal(d * d)
        ref = m @ v
        out = fast_matvec_M(t_flat, g, v)
        assert np.linalg.norm(out - ref) <= 1e-9 * np.linalg.norm(ref)


def test_naive_ptm_matches_definition():
    rng = np.random.default_rng(4)
    e = rng.standard_normal((3, 3, 3))
    out = naive_ptm(Tensor3(e))
    expected = np.zeros((3, 3))
    for i in range(3):
        expected += (e[i, 0, 0] + e[i, 1, 1] + e[i, 2, 2]) * e[i]
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_naive_partial_trace_identity():
    d = 3
    np.testing.assert_array_equal(naive_partial_trace(np.eye(d * d)), d * np.eye(d))


def test_greedy_match_identity():
    truth = np.eye(2)
    pi, cos = greedy_match(truth, truth)
    assert list(pi) == [0, 1]
    np.testing.assert_allclose(cos, [1.0, 1.0])


def test_greedy_match_sign_blind_permutation():
    truth = np.eye(2)
    found = np.array([[0.0, -1.0], [1.0, 0.0]])  # {-e2, e1}
    pi, cos = greedy_match(truth, found)
    assert list(pi) == [1, 0]
    np.testing.assert_allclose(cos, [1.0, 1.0])


def test_greedy_match_noisy():
    rng = np.random.default_rng(5)
    truth = rng.standard_normal((5, 10))
    truth /= np.linalg.norm(truth, axis=1, keepdims=True)
    found = truth + 0.01 * rng.standard_normal((5, 10))
    found /= np.linalg.norm(found, axis=1, keepdims=True)
    _, cos = greedy_match(truth, found)
    assert np.all(cos >= 0.999)


def test_greedy_match_partial_found():
    truth = np.eye(3)
    pi, cos = greedy_match(truth, np.eye(3)[:2])
    assert list(pi) == [0, 1, -1]
    assert cos[2] == 0.0


def test_greedy_match_rejects_excess_found():
    with pytest.raises(ValueError):
        greedy_match(np.eye(2), np.eye(3))
