import numpy as np
import pytest

from billzeta.eigensolve import (
    cholesky_lower,
    eigh_symmetric,
    householder_tridiagonalize,
    solve_lower,
    solve_lower_transpose,
    tridiagonal_ql,
)
from billzeta.errors import FactorizationError

RNG = np.random.default_rng(7)


def random_spd(n):
    a = RNG.standard_normal((n, n))
    return a @ a.T + n * np.eye(n)


def test_cholesky_reconstructs():
    a = random_spd(20)
    lower = cholesky_lower(a)
    assert np.allclose(lower @ lower.T, a, atol=1e-11)
    assert np.all(np.triu(lower, 1) == 0.0)


def test_cholesky_rejects_indefinite():
    a = np.diag([1.0, -2.0, 3.0])
    with pytest.raises(FactorizationError):
        cholesky_lower(a)


def test_triangular_solves():
    a = random_spd(15)
    lower = cholesky_lower(a)
    rhs = RNG.standard_normal((15, 4))
    x = solve_lower(lower, rhs)
    assert np.allclose(lower @ x, rhs, atol=1e-12)
    y = solve_lower_transpose(lower, rhs)
    assert np.allclose(lower.T @ y, rhs, atol=1e-12)


def test_tridiagonalization_preserves_spectrum():
    a = random_spd(30)
    d, e, q = householder_tridiagonalize(a, want_transform=True)
    t = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    assert np.allclose(q @ t @ q.T, a, atol=1e-10)
    assert np.allclose(q @ q.T, np.eye(30), atol=1e-12)


def test_ql_on_diagonal_matrix_is_exact():
    d = np.array([5.0, 1.0, 3.0, 2.0])
    e = np.zeros(3)
    values, _ = tridiagonal_ql(d, e, None)
    assert np.array_equal(values, np.array([1.0, 2.0, 3.0, 5.0]))


@pytest.mark.parametrize("n", [3, 17, 60])
def test_eigh_against_numpy(n):
    a = random_spd(n) + np.diag(np.linspace(0, 50, n))
    values, vectors = eigh_symmetric(a, want_vectors=True)
    ref = np.linalg.eigvalsh(a)
    assert np.allclose(values, ref, rtol=1e-12, atol=1e-10)
    assert np.allclose(a @ vectors, vectors * values[None, :], atol=1e-9)
    assert np.allclose(vectors.T @ vectors, np.eye(n), atol=1e-11)


def test_eigh_handles_clusters():
    # nearly degenerate cluster plus exact degeneracies
    d = np.array([1.0, 1.0, 1.0 + 1e-13, 4.0, 9.0, 9.0])
    q, _ = np.linalg.qr(RNG.standard_normal((6, 6)))
    a = q @ np.diag(d) @ q.T
    a = 0.5 * (a + a.T)
    values, vectors = eigh_symmetric(a, want_vectors=True)
    assert np.allclose(np.sort(d), values, atol=1e-11)
    assert np.allclose(a @ vectors, vectors * values[None, :], atol=1e-10)
