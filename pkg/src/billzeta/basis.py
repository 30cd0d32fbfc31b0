"""Homogeneous Dirichlet eigenbasis and matrix elements of density powers.

The homogeneous problem is the negative Laplacian with Dirichlet conditions
on a string [0, L] or a rectangle [0, a] x [0, b].  Everything downstream
consumes the basis through two objects built here:

* ``ModeBasis``   -- eigenvalues and mode bookkeeping, sorted ascending
                     (ties broken by lexicographic multi-index);
* ``SigmaPowerTable`` -- the matrices <n| sigma^j |m> for j = 0..J.

Matrix elements are computed by composite Gauss-Legendre quadrature, or by
exact selection rules when the profile is a cosine series.  Tables can be
cached to disk in a checksummed flat binary format.
"""

from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import QuadratureError, ValidationError

DEFAULT_CACHE_DIR = ".billzeta-cache"
CACHE_ENV_VAR = "BILLZETA_CACHE_DIR"

_GL_PANEL_NODES = 32
_gl_panel_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


# ---------------------------------------------------------------------------
# domains and mode bases
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class String1D:
    """Dirichlet string on [0, length]; mode n has eigenvalue (n pi / length)^2."""

    length: float = 1.0

    def __post_init__(self):
        if not self.length > 0:
            raise ValidationError("string length must be positive")


@dataclass(frozen=True)
class Rectangle2D:
    """Dirichlet rectangle [0,a] x [0,b]; mode (j,k) has pi^2 (j^2/a^2 + k^2/b^2)."""

    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValidationError("rectangle sides must be positive")


def _enumerate_rectangle_modes(a: float, b: float, count: int) -> list[tuple[int, int]]:
    # grow the candidate square until the count-th smallest eigenvalue is
    # provably below anything outside the candidate set
    cap = max(4, int(math.isqrt(count)) + 2)
    while True:
        cand = [
            (math.pi**2 * (j * j / a**2 + k * k / b**2), j, k)
            for j in range(1, cap + 1)
            for k in range(1, cap + 1)
        ]
        if len(cand) >= count:
            cand.sort()
            boundary = math.pi**2 * (cap + 1) ** 2 * min(1 / a**2, 1 / b**2)
            if cand[count - 1][0] < boundary:
                return [(j, k) for _, j, k in cand[:count]]
        cap *= 2


@dataclass(frozen=True)
class ModeBasis:
    """Truncated homogeneous eigenbasis: a domain plus the retained mode count."""

    domain: String1D | Rectangle2D
    mode_count: int

    def __post_init__(self):
        if self.mode_count < 1:
            raise ValidationError("mode_count must be >= 1")

    @property
    def dimension(self) -> int:
        return 1 if isinstance(self.domain, String1D) else 2

    def mode_indices(self) -> list:
        """Mode labels in ascending-eigenvalue order (1-based ints, or (j,k))."""
        if isinstance(self.domain, String1D):
            return list(range(1, self.mode_count + 1))
        return _enumerate_rectangle_modes(self.domain.a, self.domain.b, self.mode_count)

    def eigenvalues(self) -> np.ndarray:
        if isinstance(self.domain, String1D):
            n = np.arange(1, self.mode_count + 1, dtype=float)
            return (n * math.pi / self.domain.length) ** 2
        jk = np.asarray(self.mode_indices(), dtype=float)
        return math.pi**2 * (jk[:, 0] ** 2 / self.domain.a**2 + jk[:, 1] ** 2 / self.domain.b**2)

    def eigenvalue(self, n: int) -> float:
        """Eigenvalue of the n-th retained mode, n = 1..M."""
        if not 1 <= n <= self.mode_count:
            raise ValidationError(
                f"mode index {n} out of range 1..{self.mode_count}"
            )
        return float(self.eigenvalues()[n - 1])


def eigenvalue(basis: ModeBasis, n: int) -> float:
    return basis.eigenvalue(n)


# ---------------------------------------------------------------------------
# density profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FourierCosine:
    """sigma(x) = sum_k coeffs[k] * cos(k pi x / L); coeffs[0] is the constant."""

    coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def evaluate(self, x: np.ndarray, length: float) -> np.ndarray:
        out = np.zeros_like(np.asarray(x, dtype=float))
        for k, c in enumerate(self.coeffs):
            if c != 0.0:
                out += c * np.cos(k * math.pi * np.asarray(x) / length)
        return out

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.coeffs)

    def bandwidth(self) -> int:
        return max((k for k, c in enumerate(self.coeffs) if c != 0.0), default=0)


@dataclass(frozen=True)
class Polynomial:
    """sigma(x) = sum_p coeffs[p] * x^p in the physical coordinate."""

    coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def evaluate(self, x: np.ndarray, length: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in reversed(self.coeffs):
            out = out * x + c
        return out

    @property
    def is_zero(self) -> bool:
        return all(c == 0.0 for c in self.coeffs)

    def bandwidth(self) -> int:
        # algebraic, not oscillatory; small constant keeps the node plan safe
        return len(self.coeffs) + 8


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear interpolation through (x, y) samples (lower-accuracy path)."""

    xs: tuple[float, ...]
    ys: tuple[float, ...]

    def __post_init__(self):
        xs = tuple(float(v) for v in self.xs)
        ys = tuple(float(v) for v in self.ys)
        if len(xs) != len(ys) or len(xs) < 2:
            raise ValidationError("tabulated profile needs >= 2 matching samples")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValidationError("tabulated abscissae must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def evaluate(self, x: np.ndarray, length: float) -> np.ndarray:
        return np.interp(np.asarray(x, dtype=float), self.xs, self.ys)

    @property
    def is_zero(self) -> bool:
        return all(y == 0.0 for y in self.ys)

    def bandwidth(self) -> int:
        return max(16, len(self.xs))


Profile1D = FourierCosine | Polynomial | Tabulated


@dataclass(frozen=True)
class Separable2D:
    """sigma(x, y) = sum_t px_t(x) * py_t(y): sums of separable products."""

    terms: tuple[tuple[Profile1D, Profile1D], ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((px, py) for px, py in self.terms))

    @property
    def is_zero(self) -> bool:
        return all(px.is_zero or py.is_zero for px, py in self.terms)

    def evaluate_grid(self, x: np.ndarray, y: np.ndarray, a: float, b: float) -> np.ndarray:
        out = np.zeros((np.size(x), np.size(y)))
        for px, py in self.terms:
            out += np.outer(px.evaluate(x, a), py.evaluate(y, b))
        return out


Profile = Profile1D | Separable2D

ZERO_PROFILE = FourierCosine(())


@dataclass(frozen=True)
class DensityPerturbation:
    """Density Sigma(x) = 1 + lam * sigma(x) with a mild profile sigma.

    The strength must satisfy sup |lam * sigma| < 1 so Sigma stays positive
    and the square-root binomial series converges.
    """

    profile: Profile
    lam: float = 0.0

    def sigma_sup(self, domain: String1D | Rectangle2D) -> float:
        """Sampled estimate of sup |sigma| over the domain."""
        if isinstance(domain, String1D):
            xs = np.linspace(0.0, domain.length, 4097)
            if isinstance(self.profile, Tabulated):
                xs = np.union1d(xs, np.clip(self.profile.xs, 0.0, domain.length))
            return float(np.max(np.abs(self.profile.evaluate(xs, domain.length))))
        if not isinstance(self.profile, Separable2D):
            raise ValidationError("2D domains need a Separable2D profile")
        xs = np.linspace(0.0, domain.a, 513)
        ys = np.linspace(0.0, domain.b, 513)
        return float(np.max(np.abs(self.profile.evaluate_grid(xs, ys, domain.a, domain.b))))

    def validate(self, domain: String1D | Rectangle2D) -> None:
        if isinstance(domain, Rectangle2D) and not isinstance(self.profile, Separable2D):
            raise ValidationError("2D domains need a Separable2D profile")
        if isinstance(domain, String1D) and isinstance(self.profile, Separable2D):
            raise ValidationError("1D domains need a 1D profile")
        bound = abs(self.lam) * self.sigma_sup(domain)
        if bound >= 1.0:
            raise ValidationError(
                f"density bound violated: sup|lambda*sigma| = {bound:.6g} >= 1"
            )


# ---------------------------------------------------------------------------
# quadrature machinery
# ---------------------------------------------------------------------------


def _gl_panel(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    if nodes not in _gl_panel_cache:
        _gl_panel_cache[nodes] = np.polynomial.legendre.leggauss(nodes)
    return _gl_panel_cache[nodes]


def _composite_grid(length: float, total_nodes: int, breakpoints=()) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre grid on [0, length] with >= total_nodes nodes.

    Panel edges include any interpolation breakpoints so piecewise-smooth
    integrands stay panelwise analytic.
    """
    panels = max(1, math.ceil(total_nodes / _GL_PANEL_NODES))
    edges = np.linspace(0.0, length, panels + 1)
    if len(breakpoints):
        inner = np.asarray(breakpoints, dtype=float)
        inner = inner[(inner > 0.0) & (inner < length)]
        edges = np.unique(np.concatenate([edges, inner]))
    xg, wg = _gl_panel(_GL_PANEL_NODES)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return x, w


def _factors_bandwidth(factors) -> int:
    return sum(p.bandwidth() * power for p, power in factors)


def _all_cosine(factors) -> bool:
    return all(isinstance(p, FourierCosine) for p, _ in factors)


def _cosine_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Product of two cosine series: cos p * cos q = (cos(p+q) + cos|p-q|)/2."""
    out = np.zeros(len(a) + len(b) - 1)
    for p, ca in enumerate(a):
        if ca == 0.0:
            continue
        for q, cb in enumerate(b):
            if cb == 0.0:
                continue
            half = 0.5 * ca * cb
            out[p + q] += half
            out[abs(p - q)] += half
    return out


def _cosine_coeffs_of_factors(factors) -> np.ndarray:
    coeffs = np.array([1.0])
    for profile, power in factors:
        base = np.asarray(profile.coeffs, dtype=float)
        if base.size == 0:
            base = np.array([0.0])
        for _ in range(power):
            coeffs = _cosine_multiply(coeffs, base)
    return coeffs


def _exact_cosine_elements(n_max: int, coeffs: np.ndarray) -> np.ndarray:
    """<n| f |m> for f a cosine series: (1/2)(c_|n-m| - c_{n+m}) + c_0 delta_nm."""
    c = np.zeros(2 * n_max + 1)
    c[: min(len(coeffs), len(c))] = coeffs[: len(c)]
    idx = np.arange(1, n_max + 1)
    diff = np.abs(idx[:, None] - idx[None, :])
    summ = idx[:, None] + idx[None, :]
    out = 0.5 * (c[diff] - c[summ])
    np.fill_diagonal(out, c[0] - 0.5 * c[summ.diagonal()])
    return out


def _quad_elements_1d(n_max: int, length: float, factors, nodes: int | None) -> np.ndarray:
    """<n| prod_i p_i^{power_i} |m> on the 1D sine basis by composite quadrature.

    A refined-grid recomputation of the hardest row guards against an
    insufficient node plan.
    """
    breakpoints = []
    for p, _ in factors:
        if isinstance(p, Tabulated):
            breakpoints.extend(p.xs)
    plan = nodes or max(256, 8 * (n_max + _factors_bandwidth(factors)))
    x, w = _composite_grid(length, plan, breakpoints)
    f = np.ones_like(x)
    for p, power in factors:
        f *= p.evaluate(x, length) ** power
    n = np.arange(1, n_max + 1)
    phi = math.sqrt(2.0 / length) * np.sin(np.outer(n, x) * math.pi / length)
    out = (phi * (w * f)[None, :]) @ phi.T

    # self-check: recompute the highest (most oscillatory) row on a finer grid
    x2, w2 = _composite_grid(length, int(plan * 1.5) + _GL_PANEL_NODES, breakpoints)
    f2 = np.ones_like(x2)
    for p, power in factors:
        f2 *= p.evaluate(x2, length) ** power
    phi_row = math.sqrt(2.0 / length) * np.sin(n_max * x2 * math.pi / length)
    phi2 = math.sqrt(2.0 / length) * np.sin(np.outer(n, x2) * math.pi / length)
    check = phi2 @ (w2 * f2 * phi_row)
    scale = max(1.0, float(np.max(np.abs(out))))
    err = float(np.max(np.abs(check - out[:, -1])))
    if err > 1e-10 * scale:
        raise QuadratureError(
            f"quadrature self-check failed: row error {err:.3e} at {plan} nodes"
        )
    return out


def _elements_1d(n_max: int, length: float, factors, nodes: int | None = None) -> np.ndarray:
    """Dispatch: exact selection rules for pure cosine factors, quadrature otherwise."""
    if any(p.is_zero and power > 0 for p, power in factors):
        return np.zeros((n_max, n_max))
    if _all_cosine(factors):
        return _exact_cosine_elements(n_max, _cosine_coeffs_of_factors(factors))
    return _quad_elements_1d(n_max, length, factors, nodes)


def _symmetrize_upper(a: np.ndarray) -> np.ndarray:
    """Copy the upper triangle onto the lower one: exact symmetry by construction."""
    out = np.triu(a)
    return out + np.triu(a, 1).T


def _multinomial(total: int, parts: tuple[int, ...]) -> int:
    out = math.factorial(total)
    for p in parts:
        out //= math.factorial(p)
    return out


def _compositions(total: int, slots: int):
    if slots == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, slots - 1):
            yield (first,) + rest


# ---------------------------------------------------------------------------
# the sigma-power table
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SigmaPowerTable:
    """Matrices S_j[n, m] = <n| sigma^j |m> for j = 0..max_power, n, m = 1..size."""

    max_power: int
    size: int
    entries: np.ndarray  # shape (max_power + 1, size, size)
    quadrature_meta: dict

    def power(self, j: int) -> np.ndarray:
        if not 0 <= j <= self.max_power:
            raise ValidationError(f"power {j} outside table range 0..{self.max_power}")
        return self.entries[j]


def _profile_token(profile: Profile) -> str:
    if isinstance(profile, FourierCosine):
        return "cos:" + ",".join(repr(c) for c in profile.coeffs)
    if isinstance(profile, Polynomial):
        return "poly:" + ",".join(repr(c) for c in profile.coeffs)
    if isinstance(profile, Tabulated):
        return (
            "tab:" + ",".join(repr(v) for v in profile.xs)
            + "|" + ",".join(repr(v) for v in profile.ys)
        )
    return "sep:[" + ";".join(
        _profile_token(px) + "*" + _profile_token(py) for px, py in profile.terms
    ) + "]"


def _basis_token(basis: ModeBasis) -> str:
    d = basis.domain
    if isinstance(d, String1D):
        return f"string:{d.length!r}:M={basis.mode_count}"
    return f"rect:{d.a!r}x{d.b!r}:M={basis.mode_count}"


def table_content_key(basis: ModeBasis, profile: Profile, max_power: int, meta: dict) -> str:
    """Stable content hash of everything the table numerically depends on."""
    text = "|".join(
        [
            "billzeta-sigma-table-v1",
            _basis_token(basis),
            _profile_token(profile),
            f"J={max_power}",
            f"quad={meta.get('rule')}:{meta.get('nodes')}",
        ]
    )
    return hashlib.sha256(text.encode()).hexdigest()


_CACHE_MAGIC = b"BZSPTBL1"
_CACHE_VERSION = 1


def _cache_path(cache_dir: Path, key: str) -> Path:
    return cache_dir / f"sigma-{key[:32]}.bzt"


def _write_cache(path: Path, key: str, data: np.ndarray) -> None:
    payload = np.ascontiguousarray(data, dtype="<f8").tobytes()
    digest = hashlib.sha256(payload).digest()
    header = (
        _CACHE_MAGIC
        + struct.pack("<I", _CACHE_VERSION)
        + bytes.fromhex(key)
        + struct.pack("<III", *data.shape)
        + digest
    )
    tmp = path.with_suffix(".tmp")
    tmp.write_bytes(header + payload)
    os.replace(tmp, path)


def _read_cache(path: Path, key: str, shape: tuple[int, int, int]) -> np.ndarray | None:
    try:
        blob = path.read_bytes()
    except OSError:
        return None
    head = len(_CACHE_MAGIC) + 4 + 32 + 12 + 32
    if len(blob) < head or blob[: len(_CACHE_MAGIC)] != _CACHE_MAGIC:
        return None
    off = len(_CACHE_MAGIC)
    (version,) = struct.unpack_from("<I", blob, off)
    off += 4
    if version != _CACHE_VERSION or blob[off : off + 32] != bytes.fromhex(key):
        return None
    off += 32
    dims = struct.unpack_from("<III", blob, off)
    off += 12
    digest = blob[off : off + 32]
    off += 32
    payload = blob[off:]
    if dims != shape or hashlib.sha256(payload).digest() != digest:
        return None  # corruption: caller recomputes
    if len(payload) != 8 * dims[0] * dims[1] * dims[2]:
        return None
    return np.frombuffer(payload, dtype="<f8").reshape(dims).astype(float)


def resolve_cache_dir(cache_dir=None) -> Path | None:
    """Resolve the cache directory: explicit arg, else env var, else default.

    Pass cache_dir=False to disable caching entirely.
    """
    if cache_dir is False:
        return None
    if cache_dir is not None:
        return Path(cache_dir)
    env = os.environ.get(CACHE_ENV_VAR)
    return Path(env) if env else Path(DEFAULT_CACHE_DIR)


def build_sigma_table(
    basis: ModeBasis,
    density: DensityPerturbation | Profile,
    max_power: int,
    size: int | None = None,
    *,
    nodes: int | None = None,
    cache_dir=False,
) -> SigmaPowerTable:
    """Build (or load from cache) the table of <n| sigma^j |m>, j = 0..max_power.

    Parameters
    ----------
    basis : ModeBasis
    density : DensityPerturbation or a bare profile
        Only the profile matters; the table is independent of the strength.
    max_power : int
        Highest power J >= 1.
    size : int, optional
        Truncation M; defaults to basis.mode_count.
    nodes : int, optional
        Override the automatic quadrature node plan.
    cache_dir : path-like, None, or False
        False disables caching (default); None resolves the environment
        variable / default directory; a path uses that directory.
    """
    if max_power < 1:
        raise ValidationError("max_power must be >= 1")
    m_size = size or basis.mode_count
    if m_size < 1:
        raise ValidationError("table size must be >= 1")
    if m_size > basis.mode_count:
        raise ValidationError("table size cannot exceed basis.mode_count")
    profile = density.profile if isinstance(density, DensityPerturbation) else density

    meta = {
        "rule": "composite-gauss-legendre-32",
        "nodes": nodes or "auto",
        "exact_cosine": False,
    }
    sub_basis = ModeBasis(basis.domain, m_size)
    key = table_content_key(sub_basis, profile, max_power, meta)

    directory = resolve_cache_dir(cache_dir)
    if directory is not None:
        cached = _read_cache(_cache_path(directory, key), key, (max_power + 1, m_size, m_size))
        if cached is not None:
            return SigmaPowerTable(max_power, m_size, cached, dict(meta, cached=True))

    entries = np.empty((max_power + 1, m_size, m_size))
    entries[0] = np.eye(m_size)
    if profile.is_zero:
        entries[1:] = 0.0
        meta["exact_cosine"] = True
    elif isinstance(basis.domain, String1D):
        meta["exact_cosine"] = isinstance(profile, FourierCosine)
        for j in range(1, max_power + 1):
            raw = _elements_1d(m_size, basis.domain.length, [(profile, j)], nodes)
            entries[j] = _symmetrize_upper(raw)
    else:
        if not isinstance(profile, Separable2D):
            raise ValidationError("2D tables need a Separable2D profile")
        meta["exact_cosine"] = all(
            isinstance(px, FourierCosine) and isinstance(py, FourierCosine)
            for px, py in profile.terms
        )
        modes = np.asarray(sub_basis.mode_indices(), dtype=int)
        ix = modes[:, 0] - 1
        iy = modes[:, 1] - 1
        jmax = int(modes[:, 0].max())
        kmax = int(modes[:, 1].max())
        terms = profile.terms
        for j in range(1, max_power + 1):
            acc = np.zeros((m_size, m_size))
            for alpha in _compositions(j, len(terms)):
                coeff = float(_multinomial(j, alpha))
                fx = [(terms[t][0], p) for t, p in enumerate(alpha) if p > 0]
                fy = [(terms[t][1], p) for t, p in enumerate(alpha) if p > 0]
                ax = _elements_1d(jmax, basis.domain.a, fx, nodes) if fx else np.eye(jmax)
                ay = _elements_1d(kmax, basis.domain.b, fy, nodes) if fy else np.eye(kmax)
                acc += coeff * ax[np.ix_(ix, ix)] * ay[np.ix_(iy, iy)]
            entries[j] = _symmetrize_upper(acc)

    table = SigmaPowerTable(max_power, m_size, entries, meta)
    if directory is not None:
        directory.mkdir(parents=True, exist_ok=True)
        _write_cache(_cache_path(directory, key), key, entries)
    return table


def sigma_power_element(
    basis: ModeBasis,
    density: DensityPerturbation | Profile,
    j: int,
    n: int,
    m: int,
    *,
    nodes: int | None = None,
) -> float:
    """Single matrix element <n| sigma^j |m> (convenience accessor)."""
    if j < 0:
        raise ValidationError("power must be >= 0")
    top = max(n, m)
    if not (1 <= n <= basis.mode_count and 1 <= m <= basis.mode_count):
        raise ValidationError("mode indices out of range")
    if j == 0:
        return 1.0 if n == m else 0.0
    sub = ModeBasis(basis.domain, top)
    table = build_sigma_table(sub, density, j, top, nodes=nodes, cache_dir=False)
    return float(table.power(j)[n - 1, m - 1])
