"""Spectral coefficient matrices of the dressed and fractional-order Green's functions.

Q^(k) are the perturbative orders of the density-dressed Green's function in
the homogeneous basis; q^(k) those of its order-1/N root, defined so that the
N-fold matrix convolution of sum_k q^(k) lambda^k reproduces sum_k Q^(k) lambda^k
order by order.  Both a generic per-order recursion and the explicit closed
forms (orders <= 2, any N) are provided; they agree to rounding on the same
truncation, which the tests exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import DensityPerturbation, ModeBasis, SigmaPowerTable, _composite_grid
from .errors import ValidationError
from .kernels import delta_matrix, eta_matrix, validate_root_order, xi
from .numerics import KahanAccumulator, half_binomial

GENERIC_RECURSION = "generic-recursion"
CLOSED_FORM = "closed-form"


@dataclass(frozen=True)
class GreenCoefficientSet:
    """Per-order coefficient matrices q^(0..K) and Q^(0..K) for one root order."""

    root_order: int
    max_order: int
    size: int
    q_orders: tuple
    Q_orders: tuple
    source: str


def _sym(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def build_Q_order(k: int, table: SigmaPowerTable, basis: ModeBasis) -> np.ndarray:
    """Order-k coefficient of the dressed Green's function.

    Q^(k)[n,m] = sum_{j<=k} binom(1/2,j) binom(1/2,k-j) sum_r S_j[n,r] S_{k-j}[r,m] / eps_r
    with the internal sum truncated at the table size.
    """
    if k < 0:
        raise ValidationError("order must be >= 0")
    if k > table.max_power:
        raise ValidationError(
            f"order {k} exceeds table max_power {table.max_power}"
        )
    m = table.size
    eps = basis.eigenvalues()[:m]
    inv = 1.0 / eps
    acc = KahanAccumulator((m, m))
    for j in range(k + 1):
        coeff = half_binomial(j) * half_binomial(k - j)
        left = table.power(j)
        right = table.power(k - j)
        acc.add(coeff * ((left * inv[None, :]) @ right))
    return _sym(acc.total)


def q_closed_form(n_root: int, k: int, table: SigmaPowerTable, basis: ModeBasis) -> np.ndarray:
    """Explicit closed forms of q^(k) for k <= 2 at any root order N.

    q^(0) = diag(eps^{-1/N}); q^(1) = (1/2) Delta * S_1; q^(2) adds the
    xi-kernel double sum.  Orders above two must use the generic recursion.
    """
    n = validate_root_order(n_root)
    if k < 0 or k > 2:
        raise ValidationError("closed forms cover orders 0..2; use the generic recursion")
    m = table.size
    eps = basis.eigenvalues()[:m]
    if k == 0:
        return np.diag(eps ** (-1.0 / n))
    dmat = delta_matrix(n, eps)
    if k == 1:
        return _sym(0.5 * dmat * table.power(1))
    s1 = table.power(1)
    b = dmat * s1
    inv = 1.0 / eps
    plain = (s1 * inv[None, :]) @ s1
    # xi-weighted part: sum over the (j, l) exponent lattice of the xi kernel
    acc = KahanAccumulator((m, m))
    for j in range(n - 1):
        u_j = eps ** (-j / n)
        for l in range(n - 1 - j):
            u_l = eps ** (-l / n)
            u_c = eps ** (-(n - 2 - j - l) / n)
            acc.add((u_j[:, None] * b * u_l[None, :]) @ (b * u_c[None, :]))
    q2 = -0.125 * dmat * table.power(2) + (plain - acc.total) / (4.0 * eta_matrix(n, eps))
    return _sym(q2)


def _lambda_power_product(q_list, n_factors: int, total: int) -> np.ndarray:
    """Coefficient of lambda^total in (sum_j q_list[j] lambda^j)^n_factors.

    q_list may be shorter than total+1; missing orders count as zero.
    Accumulation is compensated so long product chains stay tight.
    """
    size = q_list[0].shape[0]
    top = min(len(q_list) - 1, total)
    current = {c: q_list[c] for c in range(top + 1)}
    for _ in range(n_factors - 1):
        nxt = {}
        for c in range(total + 1):
            acc = KahanAccumulator((size, size))
            hit = False
            for a in range(max(0, c - top), c + 1):
                if a in current and c - a <= top:
                    acc.add(current[a] @ q_list[c - a])
                    hit = True
            if hit:
                nxt[c] = acc.total
        current = nxt
    return current.get(total, np.zeros((size, size)))


def q_generic_recursion(
    n_root: int, max_order: int, table: SigmaPowerTable, basis: ModeBasis
) -> GreenCoefficientSet:
    """Solve the per-order N-fold convolution identity iteratively.

    Because q^(0) is positive diagonal, the terms containing the unknown q^(k)
    collapse to eta(N; eps_n, eps_m) * q^(k)[n,m]; each order is obtained by
    subtracting the known lower-order products and dividing elementwise by eta.
    """
    n = validate_root_order(n_root)
    if max_order < 0:
        raise ValidationError("max_order must be >= 0")
    if max_order > table.max_power:
        raise ValidationError("max_order cannot exceed the table max_power")
    m = table.size
    eps = basis.eigenvalues()[:m]
    eta = eta_matrix(n, eps)
    q_orders = [np.diag(eps ** (-1.0 / n))]
    big_q = [build_Q_order(k, table, basis) for k in range(max_order + 1)]
    for k in range(1, max_order + 1):
        lower = _lambda_power_product(q_orders, n, k)  # all parts <= k-1
        q_orders.append(_sym((big_q[k] - lower) / eta))
    return GreenCoefficientSet(n, max_order, m, tuple(q_orders), tuple(big_q), GENERIC_RECURSION)


def build_coefficient_set(
    n_root: int,
    max_order: int,
    table: SigmaPowerTable,
    basis: ModeBasis,
    source: str = GENERIC_RECURSION,
) -> GreenCoefficientSet:
    """Coefficient set from either construction route."""
    if source == GENERIC_RECURSION:
        return q_generic_recursion(n_root, max_order, table, basis)
    if source != CLOSED_FORM:
        raise ValidationError(f"unknown source {source!r}")
    if max_order > 2:
        raise ValidationError("closed-form source covers orders <= 2")
    qs = tuple(q_closed_form(n_root, k, table, basis) for k in range(max_order + 1))
    big_q = tuple(build_Q_order(k, table, basis) for k in range(max_order + 1))
    return GreenCoefficientSet(n_root, max_order, table.size, qs, big_q, CLOSED_FORM)


def verify_convolution(
    cset: GreenCoefficientSet,
    k: int,
    *,
    discard: int | None = None,
    reference_q: np.ndarray | None = None,
) -> float:
    """Max-norm residual of the order-k N-fold convolution identity.

    The convolution of the stored q orders is compared against Q^(k): by
    default the set's own matrix (a self-consistency check that is zero up to
    rounding), or `reference_q` built at a larger truncation to measure the
    genuine truncation error.  The outermost `discard` modes are excluded
    (default size // 4); pass discard=0 to include the truncation edge.
    """
    if k < 0 or k > cset.max_order:
        raise ValidationError("order outside the coefficient set range")
    conv = _lambda_power_product(list(cset.q_orders), cset.root_order, k)
    target = cset.Q_orders[k] if reference_q is None else reference_q
    b = cset.size // 4 if discard is None else int(discard)
    if not 0 <= b < cset.size:
        raise ValidationError("discard count out of range")
    inner = slice(0, cset.size - b)
    return float(np.max(np.abs(conv[inner, inner] - target[inner, inner])))


def reference_Q(k: int, basis: ModeBasis, density, size: int, *, growth: int = 2, nodes=None) -> np.ndarray:
    """Q^(k) with internal sums converged beyond truncation `size`.

    Built at growth * size modes and sliced back; for banded (cosine) profiles
    this makes the internal mode sums exact for the retained block.
    """
    from .basis import build_sigma_table  # local import avoids cycle at module load

    big = ModeBasis(basis.domain, max(size * growth, size + 8))
    table = build_sigma_table(big, density, max(k, 1), big.mode_count, nodes=nodes, cache_dir=False)
    return build_Q_order(k, table, big)[:size, :size]


def sqrt_density_elements(
    basis: ModeBasis,
    density: DensityPerturbation,
    *,
    method: str = "quadrature",
    table: SigmaPowerTable | None = None,
    nodes: int | None = None,
) -> np.ndarray:
    """Matrix elements <n| sqrt(Sigma) |m> of the square-root density.

    method="quadrature" integrates sqrt(1 + lam*sigma) directly;
    method="series" sums the binomial series over a sigma-power table.
    """
    density.validate(basis.domain)
    m = basis.mode_count
    if method == "series":
        if table is None:
            raise ValidationError("series method needs a sigma-power table")
        out = np.zeros((table.size, table.size))
        for j in range(table.max_power + 1):
            out += half_binomial(j) * density.lam**j * table.power(j)
        return out
    if method != "quadrature":
        raise ValidationError(f"unknown method {method!r}")
    domain = basis.domain
    if basis.dimension == 1:
        plan = nodes or max(512, 8 * (m + 32))
        x, w = _composite_grid(domain.length, plan)
        f = np.sqrt(1.0 + density.lam * density.profile.evaluate(x, domain.length))
        n = np.arange(1, m + 1)
        phi = math.sqrt(2.0 / domain.length) * np.sin(np.outer(n, x) * math.pi / domain.length)
        return _sym((phi * (w * f)[None, :]) @ phi.T)
    modes = np.asarray(basis.mode_indices(), dtype=int)
    jmax, kmax = int(modes[:, 0].max()), int(modes[:, 1].max())
    plan_x = nodes or max(512, 8 * (jmax + 32))
    plan_y = nodes or max(512, 8 * (kmax + 32))
    x, wx = _composite_grid(domain.a, plan_x)
    y, wy = _composite_grid(domain.b, plan_y)
    f = np.sqrt(1.0 + density.lam * density.profile.evaluate_grid(x, y, domain.a, domain.b))
    phix = math.sqrt(2.0 / domain.a) * np.sin(np.outer(np.arange(1, jmax + 1), x) * math.pi / domain.a)
    phiy = math.sqrt(2.0 / domain.b) * np.sin(np.outer(np.arange(1, kmax + 1), y) * math.pi / domain.b)
    # T[j1,j2,k1,k2] = sum_{gx,gy} phix[j1] phix[j2] (f wx wy) phiy[k1] phiy[k2]
    weighted = f * wx[:, None] * wy[None, :]
    gx = np.einsum("ag,bg,gh->abh", phix, phix, weighted)  # x-contracted, y-grid open
    y_pairs = (phiy[:, None, :] * phiy[None, :, :]).reshape(kmax * kmax, y.size)
    full = (gx.reshape(jmax * jmax, y.size) @ y_pairs.T).reshape(jmax, jmax, kmax, kmax)
    ix = modes[:, 0] - 1
    iy = modes[:, 1] - 1
    out = full[ix[:, None], ix[None, :], iy[:, None], iy[None, :]]
    return _sym(out)


def q_resummed_approx(
    basis: ModeBasis,
    density: DensityPerturbation,
    *,
    method: str = "quadrature",
    table: SigmaPowerTable | None = None,
    nodes: int | None = None,
) -> np.ndarray:
    """Leading-term resummation of the half-order coefficients.

    Approximates q[1/2] by Delta[1/2]_{nm} <n| sqrt(Sigma) |m>; exact at order
    lambda but only approximate beyond it (the eta-weighted sums are dropped).
    """
    elements = sqrt_density_elements(basis, density, method=method, table=table, nodes=nodes)
    m = elements.shape[0]
    eps = basis.eigenvalues()[:m]
    return delta_matrix(2, eps) * elements


def export_coefficients_csv(matrix: np.ndarray, path) -> None:
    """Write a coefficient matrix as (row, col, value) CSV, 17 significant digits."""
    with open(path, "w", newline="\n") as fh:
        fh.write("row,col,value\n")
        for i in range(matrix.shape[0]):
            for j in range(matrix.shape[1]):
                fh.write(f"{i + 1},{j + 1},{matrix[i, j]:.17g}\n")
