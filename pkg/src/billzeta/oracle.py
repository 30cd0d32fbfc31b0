"""Brute-force ground truth: the truncated generalized eigenproblem.

Projecting the heterogeneous Helmholtz equation onto the first M homogeneous
modes gives K c = E S c with K = diag(eps_n) and S = I + lam * S_1.  Solving
it densely (in-repo Cholesky reduction + Householder/QL) yields heterogeneous
eigenvalues whose direct zeta sums validate every perturbative claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import (
    DensityPerturbation,
    ModeBasis,
    Rectangle2D,
    SigmaPowerTable,
    String1D,
    _composite_grid,
    build_sigma_table,
)
from .eigensolve import (
    cholesky_lower,
    eigh_symmetric,
    solve_lower,
    solve_lower_transpose,
)
from .errors import (
    FactorizationError,
    InsufficientDataError,
    NumericalError,
    ValidationError,
)
from .numerics import pairwise_sum
from .sumrules import (
    ROUTE_ORACLE,
    SumRuleResult,
    TRUNCATED,
    _make_result,
    _validate_s_for_basis,
    tail_estimate,
    z_closed_form,
)


@dataclass(frozen=True)
class GeneralizedProblem:
    """Galerkin projection K c = E S c on the truncated homogeneous basis."""

    stiffness: np.ndarray  # diagonal of K: the homogeneous eigenvalues
    overlap: np.ndarray  # S = I + lam * S_1, symmetric positive definite
    basis: ModeBasis
    density: DensityPerturbation

    @property
    def size(self) -> int:
        return self.stiffness.size


def assemble(
    basis: ModeBasis,
    density: DensityPerturbation,
    size: int | None = None,
    *,
    table: SigmaPowerTable | None = None,
    nodes: int | None = None,
    cache_dir=False,
) -> GeneralizedProblem:
    """Assemble the generalized problem from the density's power-1 elements."""
    density.validate(basis.domain)
    m = size or basis.mode_count
    if table is None:
        table = build_sigma_table(basis, density, 1, m, nodes=nodes, cache_dir=cache_dir)
    if table.size < m:
        raise ValidationError("table smaller than requested problem size")
    overlap = np.eye(m) + density.lam * table.power(1)[:m, :m]
    stiffness = basis.eigenvalues()[:m]
    return GeneralizedProblem(stiffness, overlap, ModeBasis(basis.domain, m), density)


def solve_spectrum(problem: GeneralizedProblem, *, want_vectors: bool = False):
    """Eigenvalues (ascending) of K c = E S c via S = L L^T reduction.

    Factorization failure is reported as a density-bound problem: S stays
    positive definite whenever sup|lam*sigma| < 1.  With want_vectors=True the
    S-orthonormal generalized eigenvectors are returned as columns.
    """
    try:
        lower = cholesky_lower(problem.overlap)
    except FactorizationError as exc:
        raise FactorizationError(
            "overlap matrix is not positive definite; the density bound "
            f"sup|lambda*sigma| < 1 is violated or nearly so ({exc})"
        ) from exc
    half = solve_lower(lower, np.diag(problem.stiffness))
    reduced = solve_lower(lower, half.T)
    reduced = 0.5 * (reduced + reduced.T)
    values, vectors = eigh_symmetric(reduced, want_vectors=want_vectors)
    if not np.all(values > 0.0):
        raise NumericalError("non-positive eigenvalue from a Dirichlet problem")
    if want_vectors:
        return values, solve_lower_transpose(lower, vectors)
    return values


def residual_norms(problem: GeneralizedProblem, values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """Relative residuals ||K c - E S c|| / ||K c|| per eigenpair."""
    kc = problem.stiffness[:, None] * vectors
    sc = problem.overlap @ vectors
    num = np.linalg.norm(kc - values[None, :] * sc, axis=0)
    den = np.linalg.norm(kc, axis=0)
    return num / den


# ---------------------------------------------------------------------------
# effective (optical) geometry for heterogeneous tails
# ---------------------------------------------------------------------------


def effective_length(domain: String1D, density: DensityPerturbation, nodes: int = 2048) -> float:
    """Optical length int_0^L sqrt(Sigma) dx."""
    x, w = _composite_grid(domain.length, nodes)
    sigma = density.profile.evaluate(x, domain.length)
    return float(np.sum(w * np.sqrt(1.0 + density.lam * sigma)))


def effective_area(domain: Rectangle2D, density: DensityPerturbation, nodes: int = 1024) -> float:
    """Optical area int Sigma dA; separable terms integrate factor by factor."""
    area = domain.a * domain.b
    x, wx = _composite_grid(domain.a, nodes)
    y, wy = _composite_grid(domain.b, nodes)
    extra = 0.0
    for px, py in density.profile.terms:
        extra += float(np.sum(wx * px.evaluate(x, domain.a))) * float(
            np.sum(wy * py.evaluate(y, domain.b))
        )
    return area + density.lam * extra


def effective_perimeter(domain: Rectangle2D, density: DensityPerturbation, nodes: int = 1024) -> float:
    """Optical perimeter: int sqrt(Sigma) along the four Dirichlet edges."""
    x, wx = _composite_grid(domain.a, nodes)
    y, wy = _composite_grid(domain.b, nodes)
    total = 0.0
    for edge_y in (0.0, domain.b):
        sigma = sum(
            px.evaluate(x, domain.a) * py.evaluate(np.array([edge_y]), domain.b)[0]
            for px, py in density.profile.terms
        )
        total += float(np.sum(wx * np.sqrt(1.0 + density.lam * sigma)))
    for edge_x in (0.0, domain.a):
        sigma = sum(
            px.evaluate(np.array([edge_x]), domain.a)[0] * py.evaluate(y, domain.b)
            for px, py in density.profile.terms
        )
        total += float(np.sum(wy * np.sqrt(1.0 + density.lam * sigma)))
    return total


# ---------------------------------------------------------------------------
# direct zeta sums
# ---------------------------------------------------------------------------


def z_direct_detail(
    eigenvalues: np.ndarray,
    s: float,
    basis: ModeBasis,
    density: DensityPerturbation | None = None,
    *,
    top_discard: float = 0.25,
) -> tuple[float, float, int]:
    """Direct sum over the computed spectrum plus a heterogeneous Weyl tail.

    The least-accurate top fraction of the Galerkin spectrum is discarded.
    In 1D the tail uses the optical length; in 2D the discarded shell is
    bridged with (rescaled) homogeneous eigenvalues before the smooth Weyl
    integral takes over at the truncation cutoff, so comparisons against the
    perturbative route share the same far tail.  Returns (value, tail, kept).
    """
    _validate_s_for_basis(s, basis)
    if not 0.0 <= top_discard < 1.0:
        raise ValidationError("top_discard must be in [0, 1)")
    eigs = np.asarray(eigenvalues, dtype=float)
    m = eigs.size
    kept = max(1, m - int(round(top_discard * m)))
    value = pairwise_sum(eigs[:kept] ** (-s))
    if basis.dimension == 1:
        if density is None or density.profile.is_zero:
            ell = basis.domain.length
        else:
            ell = effective_length(basis.domain, density)
        tail = tail_estimate(basis, s, kept, length=ell)
        return value + tail, tail, kept
    dom = basis.domain
    if density is None or density.profile.is_zero:
        a_eff = dom.a * dom.b
        p_eff = 2.0 * (dom.a + dom.b)
    else:
        a_eff = effective_area(dom, density)
        p_eff = effective_perimeter(dom, density)
    scale = (dom.a * dom.b) / a_eff  # E ~ eps * (A / A_eff) for high modes
    shell = basis.eigenvalues()[kept:m] * scale
    tail = pairwise_sum(shell ** (-s)) + tail_estimate(
        basis, s, m, area=a_eff, perimeter=p_eff
    )
    return value + tail, tail, kept


def z_direct(
    eigenvalues: np.ndarray,
    s: float,
    basis: ModeBasis,
    density: DensityPerturbation | None = None,
    *,
    top_discard: float = 0.25,
) -> float:
    value, _, _ = z_direct_detail(eigenvalues, s, basis, density, top_discard=top_discard)
    return value


def oracle_sum_rule(
    order,
    basis: ModeBasis,
    density: DensityPerturbation,
    *,
    table: SigmaPowerTable | None = None,
    top_discard: float = 0.25,
    cache_dir=False,
) -> SumRuleResult:
    """Full oracle route packaged as a SumRuleResult (z0 carries everything)."""
    from .sumrules import RationalOrderSpec  # avoid re-import cycles in typing

    if isinstance(order, RationalOrderSpec):
        s, label = order.s, order.label()
    else:
        s, label = float(order), f"{float(order):g}"
    problem = assemble(basis, density, table=table, cache_dir=cache_dir)
    eigs = solve_spectrum(problem)
    value, tail, kept = z_direct_detail(eigs, s, basis, density, top_discard=top_discard)
    return _make_result(
        s=s, lam=density.lam, z0=value, z1=0.0, z2=0.0, diagonal_mode=TRUNCATED,
        tail=tail, truncation=kept, route=ROUTE_ORACLE, label=label,
    )


# ---------------------------------------------------------------------------
# lambda-scaling validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceFit:
    """Least-squares slope of log|Z_pert - Z_direct| against log lambda."""

    slope: float
    pairs: tuple  # (lambda, error) actually fitted
    excluded: tuple  # (lambda, error, floor) dropped as below the numeric floor
    intercept: float = field(default=math.nan)


def convergence_order_fit(
    order,
    profile,
    lam_list,
    basis: ModeBasis,
    *,
    drop_second_order: bool = False,
    top_discard: float = 0.25,
    diagonal_mode: str = TRUNCATED,
    nodes: int | None = None,
    cache_dir=False,
) -> ConvergenceFit:
    """Fit the lambda-scaling of the perturbative error against the oracle.

    Points whose error sits below 10x the estimated numerical floor (tail and
    rounding mismatch) are excluded and reported; at least three usable points
    are required.  With drop_second_order=True the second-order term is left
    out, so the fitted slope should drop to about two (harness self-check).
    """
    lams = [float(v) for v in lam_list]
    if len(lams) < 3:
        raise InsufficientDataError("need at least 3 lambda values")
    table = build_sigma_table(basis, profile, 2, nodes=nodes, cache_dir=cache_dir)
    points = []
    for lam in sorted(lams):
        density = DensityPerturbation(profile, lam)
        pert = z_closed_form(order, table, basis, density, diagonal_mode=diagonal_mode)
        z_pert = pert.z_total - (pert.z2 if drop_second_order else 0.0)
        problem = assemble(basis, density, table=table)
        eigs = solve_spectrum(problem)
        z_oracle, tail_oracle, _ = z_direct_detail(
            eigs, pert.s, basis, density, top_discard=top_discard
        )
        err = abs(z_pert - z_oracle)
        floor = max(
            1e3 * np.finfo(float).eps * abs(z_pert),
            1e-4 * (pert.tail_estimate + tail_oracle),
        )
        points.append((lam, err, floor))
    usable = [(lam, err) for lam, err, floor in points if err >= 10.0 * floor]
    excluded = tuple((lam, err, floor) for lam, err, floor in points if err < 10.0 * floor)
    if len(usable) < 3:
        raise InsufficientDataError(
            f"only {len(usable)} usable points above the numerical floor; "
            "cannot fit below the truncation noise"
        )
    logs = np.log([p[0] for p in usable])
    loge = np.log([p[1] for p in usable])
    slope, intercept = np.polyfit(logs, loge, 1)
    return ConvergenceFit(float(slope), tuple(usable), excluded, float(intercept))
