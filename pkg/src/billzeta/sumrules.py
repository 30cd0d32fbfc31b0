"""Spectral zeta values Z(s) of rational order, to second order in the density.

Three routes are implemented and must agree:

* a closed form parameterized only by s (one shared expression);
* the trace of Q q[1/N] for s = 1 + 1/N;
* the trace of q[1/N] q[1/N'] for s = 1/N + 1/N'.

The trace routes reproduce the pre-split second-order expression exactly at
finite truncation; converting to the completeness-split closed form leaves the
computable deficit sum_n (S_2[n,n] - sum_m S_1[n,m]^2) eps_n^{-s}, which the
trace routes add back so all routes are limited by rounding, not by the basis
cutoff.  Mode sums rely on numpy's pairwise reduction; the order-0 tail is a
smooth-counting (Weyl) estimate appended to z0 only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .basis import DensityPerturbation, ModeBasis, SigmaPowerTable
from .coefficients import GENERIC_RECURSION, build_coefficient_set
from .errors import ValidationError
from .kernels import MAX_ROOT_ORDER, validate_root_order
from .numerics import pairwise_sum

ROUTE_CLOSED = "closed-form"
ROUTE_TRACE_1P = "trace-one-plus-inv"
ROUTE_TRACE_INV = "trace-inv-sum"
ROUTE_ORACLE = "oracle"

TRUNCATED = "truncated"
RESUMMED = "resummed"


# ---------------------------------------------------------------------------
# rational order bookkeeping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RationalOrderSpec:
    """Exponent s carried as its integer decomposition: 1 + 1/N or 1/N + 1/N'."""

    kind: str  # "one_plus_inv" | "inv_sum"
    n_root: int
    n_root2: int | None = None

    def __post_init__(self):
        if self.kind not in ("one_plus_inv", "inv_sum"):
            raise ValidationError(f"unknown decomposition kind {self.kind!r}")
        validate_root_order(self.n_root)
        if self.n_root < 2:
            raise ValidationError("decompositions use root orders N >= 2")
        if self.kind == "inv_sum":
            if self.n_root2 is None:
                raise ValidationError("inv_sum needs a second root order")
            validate_root_order(self.n_root2)
            if self.n_root2 < 2:
                raise ValidationError("decompositions use root orders N >= 2")
        elif self.n_root2 is not None:
            raise ValidationError("one_plus_inv takes a single root order")

    @property
    def s(self) -> float:
        return float(self.fraction)

    @property
    def fraction(self) -> Fraction:
        if self.kind == "one_plus_inv":
            return 1 + Fraction(1, self.n_root)
        return Fraction(1, self.n_root) + Fraction(1, self.n_root2)

    def label(self) -> str:
        if self.kind == "one_plus_inv":
            return f"1+1/{self.n_root}"
        return f"1/{self.n_root}+1/{self.n_root2}"

    def validate_for(self, basis: ModeBasis) -> None:
        s = self.s
        if basis.dimension == 1 and s <= 0.5:
            raise ValidationError(f"s = {s} diverges on a 1D string (needs s > 1/2)")
        if basis.dimension == 2 and s <= 1.0:
            raise ValidationError(f"s = {s} diverges on a 2D rectangle (needs s > 1)")

    @classmethod
    def parse(cls, text: str) -> "RationalOrderSpec":
        """Parse '1+1/4', '1/2+1/3', '3/2' or '1.25' into a decomposition."""
        raw = text.strip().replace(" ", "")
        if "+" in raw:
            left, right = raw.split("+", 1)
            lf, rf = Fraction(left), Fraction(right)
            if lf == 1 and rf.numerator == 1:
                return cls("one_plus_inv", rf.denominator)
            if lf.numerator == 1 and rf.numerator == 1:
                return cls("inv_sum", lf.denominator, rf.denominator)
            raise ValidationError(f"cannot interpret order {text!r}")
        frac = Fraction(raw)
        return cls.from_fraction(frac)

    @classmethod
    def from_fraction(cls, frac: Fraction) -> "RationalOrderSpec":
        if frac > 1:
            inv = 1 / (frac - 1)
            if inv.denominator == 1 and 2 <= inv <= MAX_ROOT_ORDER:
                return cls("one_plus_inv", int(inv))
            raise ValidationError(f"{frac} is not of the form 1 + 1/N with N in 2..{MAX_ROOT_ORDER}")
        for n in range(2, MAX_ROOT_ORDER + 1):
            rest = frac - Fraction(1, n)
            if rest.numerator == 1 and 2 <= rest.denominator <= MAX_ROOT_ORDER:
                return cls("inv_sum", n, rest.denominator)
        raise ValidationError(f"{frac} is not of the form 1/N + 1/N' with N, N' in 2..{MAX_ROOT_ORDER}")


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

CSV_FIELDS = (
    "route",
    "order_label",
    "s",
    "lam",
    "z0",
    "z1",
    "z2",
    "resummation_correction",
    "z_total",
    "tail_estimate",
    "truncation",
    "diagonal_mode",
)


@dataclass(frozen=True)
class SumRuleResult:
    """One computed Z(s) with per-order contributions and provenance."""

    s: float
    lam: float
    z0: float
    z1: float
    z2: float
    z_total: float
    diagonal_mode: str
    tail_estimate: float
    truncation: int
    route: str
    order_label: str
    resummation_correction: float = 0.0

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in CSV_FIELDS}

    def csv_row(self) -> str:
        parts = []
        for name in CSV_FIELDS:
            value = getattr(self, name)
            parts.append(f"{value:.17g}" if isinstance(value, float) else str(value))
        return ",".join(parts)


def _make_result(
    *, s, lam, z0, z1, z2, diagonal_mode, tail, truncation, route, label, correction=0.0
) -> SumRuleResult:
    return SumRuleResult(
        s=s,
        lam=lam,
        z0=z0,
        z1=z1,
        z2=z2,
        z_total=z0 + z1 + z2 + correction,
        diagonal_mode=diagonal_mode,
        tail_estimate=tail,
        truncation=truncation,
        route=route,
        order_label=label,
        resummation_correction=correction,
    )


# ---------------------------------------------------------------------------
# second-order kernels
# ---------------------------------------------------------------------------


def kernel_second_order(eps_n: float, eps_m: float, s: float, *, rtol: float = 1e-12) -> float:
    """Off-diagonal second-order kernel K = (eps_n^{1-s} - eps_m^{1-s})/(eps_m - eps_n).

    Evaluated through expm1/log1p near the diagonal, so nearly and exactly
    degenerate pairs get the analytic limit (s - 1) eps_n^{-s} without
    cancellation.  Arguments are ordered internally, making the symmetry
    K(a, b) = K(b, a) bit-exact.
    """
    if eps_n <= 0 or eps_m <= 0:
        raise ValidationError("eigenvalues must be positive")
    lo, hi = (eps_n, eps_m) if eps_n <= eps_m else (eps_m, eps_n)
    h = (hi - lo) / lo
    if abs(h) <= rtol:
        return (s - 1.0) * lo ** (-s)
    if h < 0.5:
        return lo ** (-s) * (-math.expm1((1.0 - s) * math.log1p(h))) / h
    return (lo ** (1.0 - s) - hi ** (1.0 - s)) / (hi - lo)


def kernel_second_order_presplit(eps_n: float, eps_m: float, s: float) -> float:
    """Pre-split kernel ((eps_m + 3 eps_n) eps_n^{-s} - (3 eps_m + eps_n) eps_m^{-s})/(eps_m - eps_n).

    Equal to (eps_m^{-s} + eps_n^{-s}) + 4 K(eps_n, eps_m; s); its diagonal
    limit 2(2s - 1) eps_n^{-s} is the regularity anchor.
    """
    return (eps_m ** (-s) + eps_n ** (-s)) + 4.0 * kernel_second_order(eps_n, eps_m, s)


def kernel_matrix(eps: np.ndarray, s: float) -> np.ndarray:
    """Dense K(eps_i, eps_j; s) with stable near-diagonal evaluation.

    Pairs are ordered internally (lo, hi), so the matrix is bit-exactly
    symmetric by construction.  Fractional powers are taken on the eigenvalue
    vector once and spread by min/max monotonicity, not per matrix entry.
    """
    e = np.asarray(eps, dtype=float)
    lo = np.minimum(e[:, None], e[None, :])
    hi = np.maximum(e[:, None], e[None, :])
    h = (hi - lo) / lo
    neg_pow = e ** (-s)  # decreasing in e: lo^{-s} = elementwise max
    base = np.maximum(neg_pow[:, None], neg_pow[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        out = base * (-np.expm1((1.0 - s) * np.log1p(h))) / h
    tiny = h <= 1e-12
    out[tiny] = (s - 1.0) * base[tiny]
    far = h >= 0.5
    if np.any(far):
        pw = e ** (1.0 - s)
        if s >= 1.0:  # x^{1-s} nonincreasing
            lo_pw = np.maximum(pw[:, None], pw[None, :])
            hi_pw = np.minimum(pw[:, None], pw[None, :])
        else:
            lo_pw = np.minimum(pw[:, None], pw[None, :])
            hi_pw = np.maximum(pw[:, None], pw[None, :])
        out[far] = (lo_pw - hi_pw)[far] / (hi - lo)[far]
    return out


# ---------------------------------------------------------------------------
# truncation tails from smooth eigenvalue counting
# ---------------------------------------------------------------------------


def tail_estimate(
    basis: ModeBasis,
    s: float,
    count: int | None = None,
    *,
    length: float | None = None,
    area: float | None = None,
    perimeter: float | None = None,
) -> float:
    """Estimate of sum over modes beyond the first `count` of eps^{-s}.

    Integrates the smooth Weyl counting term from the cutoff where the smooth
    count equals `count`; in 1D this is the closed form
    (L/pi)^{2s} (M + 1/2)^{1-2s} / (2s - 1).  Optional effective length /
    area / perimeter replace the homogeneous ones (heterogeneous spectra).
    Accuracy contract: within +-50% of the true remainder; use for reporting,
    never for tolerances tighter than that.
    """
    m = count if count is not None else basis.mode_count
    if m < 1:
        raise ValidationError("tail needs count >= 1")
    if basis.dimension == 1:
        if s <= 0.5:
            raise ValidationError(f"tail diverges for s = {s} <= 1/2 in 1D")
        ell = length if length is not None else basis.domain.length
        return (ell / math.pi) ** (2 * s) * (m + 0.5) ** (1 - 2 * s) / (2 * s - 1)
    if s <= 1.0:
        raise ValidationError(f"tail diverges for s = {s} <= 1 in 2D")
    dom = basis.domain
    a_eff = area if area is not None else dom.a * dom.b
    p_eff = perimeter if perimeter is not None else 2.0 * (dom.a + dom.b)
    # smooth count N(E) = A E/(4 pi) - P sqrt(E)/(4 pi) + 1/4; solve N = m
    ca = a_eff / (4.0 * math.pi)
    cp = p_eff / (4.0 * math.pi)
    disc = cp * cp + 4.0 * ca * (m - 0.25)
    root = (cp + math.sqrt(disc)) / (2.0 * ca)
    cutoff = root * root
    tail = ca * cutoff ** (1.0 - s) / (s - 1.0) - 0.5 * cp * cutoff ** (0.5 - s) / (s - 0.5)
    return max(tail, 0.0)


# ---------------------------------------------------------------------------
# the three perturbative routes
# ---------------------------------------------------------------------------


def _resolve_order(order) -> tuple[float, str, RationalOrderSpec | None]:
    if isinstance(order, RationalOrderSpec):
        return order.s, order.label(), order
    s = float(order)
    return s, f"{s:g}", None


def _validate_s_for_basis(s: float, basis: ModeBasis) -> None:
    if basis.dimension == 1 and s <= 0.5:
        raise ValidationError(f"s = {s} diverges on a 1D string (needs s > 1/2)")
    if basis.dimension == 2 and s <= 1.0:
        raise ValidationError(f"s = {s} diverges on a 2D rectangle (needs s > 1)")


def z_closed_form(
    order,
    table: SigmaPowerTable,
    basis: ModeBasis,
    density: DensityPerturbation,
    *,
    diagonal_mode: str = TRUNCATED,
) -> SumRuleResult:
    """Z(s) to second order from the shared completeness-split closed form.

    z0 = sum eps^{-s} (+ tail);  z1 = lam s sum <n|s|n> eps^{-s};
    z2 = (lam^2/2) s [ (s-1) sum <n|s|n>^2 eps^{-s}
                       + sum_{n != m} K(eps_n, eps_m; s) <n|s|m><m|s|n> ].
    With diagonal_mode="resummed" the truncated diagonal lambda-series is
    replaced by (1 + lam <n|s|n>)^s and the difference reported separately.
    """
    s, label, spec = _resolve_order(order)
    if spec is not None:
        spec.validate_for(basis)
    else:
        _validate_s_for_basis(s, basis)
    density.validate(basis.domain)
    if table.max_power < 2:
        raise ValidationError("closed form needs a table with max_power >= 2")
    if diagonal_mode not in (TRUNCATED, RESUMMED):
        raise ValidationError(f"unknown diagonal mode {diagonal_mode!r}")
    lam = density.lam
    m = table.size
    eps = basis.eigenvalues()[:m]
    weights = eps ** (-s)
    s1 = table.power(1)
    diag = np.diag(s1).copy()

    tail = tail_estimate(basis, s, m)
    z0 = pairwise_sum(weights) + tail
    z1 = 0.0
    z2 = 0.0
    correction = 0.0
    if lam != 0.0 and np.any(s1):
        z1 = lam * s * pairwise_sum(diag * weights)
        kmat = kernel_matrix(eps, s)
        off = s1 * s1
        np.fill_diagonal(off, 0.0)
        z2 = 0.5 * lam * lam * s * (
            (s - 1.0) * pairwise_sum(diag * diag * weights) + float(np.sum(kmat * off))
        )
        if diagonal_mode == RESUMMED:
            resummed = np.power(1.0 + lam * diag, s)
            series = 1.0 + lam * s * diag + 0.5 * lam * lam * s * (s - 1.0) * diag * diag
            correction = pairwise_sum(weights * (resummed - series))
    return _make_result(
        s=s, lam=lam, z0=z0, z1=z1, z2=z2, diagonal_mode=diagonal_mode, tail=tail,
        truncation=m, route=ROUTE_CLOSED, label=label, correction=correction,
    )


def _completeness_deficit(table: SigmaPowerTable, eps: np.ndarray, s: float) -> float:
    """sum_n (S_2[n,n] - sum_{m<=M} S_1[n,m]^2) eps_n^{-s}.

    The exact finite-basis deficit between the pre-split trace expression and
    the completeness-split closed form (the couplings to modes beyond the
    truncation that the traces cannot see).
    """
    s1 = table.power(1)
    deficit = np.diag(table.power(2)) - np.sum(s1 * s1, axis=1)
    return float(np.sum(deficit * eps ** (-s)))


def _trace(a: np.ndarray, b: np.ndarray) -> float:
    # tr(A B) for symmetric A, B
    return float(np.sum(a * b))


def z_via_trace_one_plus_inv(
    n_root: int,
    table: SigmaPowerTable,
    basis: ModeBasis,
    density: DensityPerturbation,
    *,
    source: str = GENERIC_RECURSION,
) -> SumRuleResult:
    """Z(1 + 1/N) as the order-by-order trace of Q q[1/N].

    The lambda^2 term carries the completeness-deficit compensation, after
    which the route matches the closed form to rounding on the same table.
    """
    spec = RationalOrderSpec("one_plus_inv", n_root)
    spec.validate_for(basis)
    density.validate(basis.domain)
    if table.max_power < 2:
        raise ValidationError("trace route needs a table with max_power >= 2")
    s = spec.s
    lam = density.lam
    m = table.size
    eps = basis.eigenvalues()[:m]
    cset = build_coefficient_set(n_root, 2, table, basis, source)
    q0, q1, q2 = cset.q_orders
    big0, big1, big2 = cset.Q_orders

    tail = tail_estimate(basis, s, m)
    z0 = _trace(big0, q0) + tail
    z1 = lam * (_trace(big0, q1) + _trace(big1, q0))
    raw2 = _trace(big1, q1) + _trace(big2, q0) + _trace(big0, q2)
    z2 = lam * lam * (raw2 + 0.25 * s * _completeness_deficit(table, eps, s))
    return _make_result(
        s=s, lam=lam, z0=z0, z1=z1, z2=z2, diagonal_mode=TRUNCATED, tail=tail,
        truncation=m, route=ROUTE_TRACE_1P, label=spec.label(),
    )


def z_via_trace_inv_sum(
    n_root: int,
    n_root2: int,
    table: SigmaPowerTable,
    basis: ModeBasis,
    density: DensityPerturbation,
    *,
    source: str = GENERIC_RECURSION,
) -> SumRuleResult:
    """Z(1/N + 1/N') as the order-by-order trace of q[1/N] q[1/N'].

    1D only: s <= 1 diverges in two dimensions.  Carries the same
    completeness-deficit compensation as the other trace route.
    """
    spec = RationalOrderSpec("inv_sum", n_root, n_root2)
    spec.validate_for(basis)
    density.validate(basis.domain)
    if table.max_power < 2:
        raise ValidationError("trace route needs a table with max_power >= 2")
    s = spec.s
    lam = density.lam
    m = table.size
    eps = basis.eigenvalues()[:m]
    set_a = build_coefficient_set(n_root, 2, table, basis, source)
    set_b = build_coefficient_set(n_root2, 2, table, basis, source)
    a0, a1, a2 = set_a.q_orders
    b0, b1, b2 = set_b.q_orders

    tail = tail_estimate(basis, s, m)
    z0 = _trace(a0, b0) + tail
    z1 = lam * (_trace(a0, b1) + _trace(a1, b0))
    raw2 = _trace(a1, b1) + _trace(a2, b0) + _trace(a0, b2)
    z2 = lam * lam * (raw2 + 0.25 * s * _completeness_deficit(table, eps, s))
    return _make_result(
        s=s, lam=lam, z0=z0, z1=z1, z2=z2, diagonal_mode=TRUNCATED, tail=tail,
        truncation=m, route=ROUTE_TRACE_INV, label=spec.label(),
    )
