"""Dense symmetric linear algebra implemented in-repo.

Cholesky factorization, triangular solves, Householder tridiagonalization and
an implicit-shift QL iteration.  numpy is used for vectorized arithmetic only;
no external eigensolver is called, which keeps the generalized eigensolve
fully deterministic and portable at the truncation sizes used here
(M up to a few thousand).
"""

import math

import numpy as np

from .errors import FactorizationError, NumericalError


def cholesky_lower(a: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric positive definite matrix."""
    n = a.shape[0]
    work = np.array(a, dtype=float, copy=True)
    lower = np.zeros_like(work)
    for j in range(n):
        pivot = work[j, j]
        if not pivot > 0.0:
            raise FactorizationError(
                f"leading minor {j + 1} not positive (pivot {pivot:.3e})"
            )
        root = math.sqrt(pivot)
        lower[j, j] = root
        if j + 1 < n:
            col = work[j + 1 :, j] / root
            lower[j + 1 :, j] = col
            work[j + 1 :, j + 1 :] -= np.outer(col, col)
    return lower


def solve_lower(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve L x = rhs by forward substitution (rhs may be a matrix)."""
    n = lower.shape[0]
    x = np.array(rhs, dtype=float, copy=True)
    for i in range(n):
        if i:
            x[i] -= lower[i, :i] @ x[:i]
        x[i] /= lower[i, i]
    return x


def solve_lower_transpose(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve L^T x = rhs by back substitution (rhs may be a matrix)."""
    n = lower.shape[0]
    x = np.array(rhs, dtype=float, copy=True)
    for i in range(n - 1, -1, -1):
        if i + 1 < n:
            x[i] -= lower[i + 1 :, i] @ x[i + 1 :]
        x[i] /= lower[i, i]
    return x


def householder_tridiagonalize(a: np.ndarray, want_transform: bool = False):
    """Reduce a symmetric matrix to tridiagonal form by Householder reflections.

    Returns (d, e, q): diagonal, subdiagonal, and (optionally) the orthogonal
    transform with a = q @ T @ q.T.
    """
    n = a.shape[0]
    work = np.array(a, dtype=float, copy=True)
    reflectors: list[tuple[int, np.ndarray, float]] = []
    for k in range(n - 2):
        x = work[k + 1 :, k]
        norm_x = math.sqrt(float(x @ x))
        if norm_x == 0.0:
            continue
        alpha = -math.copysign(norm_x, x[0] if x[0] != 0.0 else 1.0)
        v = x.copy()
        v[0] -= alpha
        vnorm2 = float(v @ v)
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        block = work[k + 1 :, k + 1 :]
        p = beta * (block @ v)
        kappa = 0.5 * beta * float(v @ p)
        w = p - kappa * v
        block -= np.outer(v, w) + np.outer(w, v)
        work[k + 1, k] = alpha
        work[k, k + 1] = alpha
        if k + 2 < n:
            work[k + 2 :, k] = 0.0
            work[k, k + 2 :] = 0.0
        if want_transform:
            reflectors.append((k, v, beta))
    d = np.diag(work).copy()
    e = np.array([work[i + 1, i] for i in range(n - 1)])
    q = None
    if want_transform:
        q = np.eye(n)
        for k, v, beta in reversed(reflectors):
            rows = q[k + 1 :, :]
            rows -= beta * np.outer(v, v @ rows)
    return d, e, q


def tridiagonal_ql(d: np.ndarray, e: np.ndarray, z: np.ndarray | None = None, max_iter: int = 50):
    """Implicit-shift QL iteration on a symmetric tridiagonal matrix.

    d is the diagonal, e the subdiagonal (length n-1).  When z is given its
    columns are rotated along, so z @ diag(d) @ z.T reproduces the input
    tridiagonal matrix.  Eigenvalues are returned ascending, deterministically.
    """
    n = d.size
    d = np.array(d, dtype=float, copy=True)
    work_e = np.zeros(n)
    work_e[: n - 1] = e
    eps = np.finfo(float).eps
    for l in range(n):
        iterations = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(work_e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            iterations += 1
            if iterations > max_iter:
                raise NumericalError("QL iteration failed to converge")
            g = (d[l + 1] - d[l]) / (2.0 * work_e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + work_e[l] / (g + math.copysign(r, g))
            s = c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * work_e[i]
                b = c * work_e[i]
                r = math.hypot(f, g)
                work_e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    work_e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if z is not None:
                    col = z[:, i + 1].copy()
                    z[:, i + 1] = s * z[:, i] + c * col
                    z[:, i] = c * z[:, i] - s * col
            if underflow:
                continue
            d[l] -= p
            work_e[l] = g
            work_e[m] = 0.0
    order = np.argsort(d, kind="stable")
    d = d[order]
    if z is not None:
        z = z[:, order]
    return (d, z) if z is not None else (d, None)


def eigh_symmetric(a: np.ndarray, want_vectors: bool = False):
    """Eigendecomposition of a dense symmetric matrix (ascending eigenvalues)."""
    d, e, q = householder_tridiagonalize(a, want_transform=want_vectors)
    if want_vectors:
        values, vectors = tridiagonal_ql(d, e, q)
        return values, vectors
    values, _ = tridiagonal_ql(d, e, None)
    return values, None
