import math
from fractions import Fraction

import numpy as np
import pytest

from billzeta.basis import (
    DensityPerturbation,
    FourierCosine,
    ModeBasis,
    Rectangle2D,
    Separable2D,
    String1D,
    build_sigma_table,
)
from billzeta.errors import ValidationError
from billzeta.sumrules import (
    RESUMMED,
    RationalOrderSpec,
    kernel_matrix,
    kernel_second_order,
    kernel_second_order_presplit,
    tail_estimate,
    z_closed_form,
    z_via_trace_inv_sum,
    z_via_trace_one_plus_inv,
)

COS2 = FourierCosine((0.0, 0.0, 1.0))
ZETA3 = 1.2020569031595942854
STRING = ModeBasis(String1D(1.0), 120)


def reference_table(m=120, profile=COS2):
    return build_sigma_table(ModeBasis(String1D(1.0), m), profile, 2)


# ---------------------------------------------------------------------------
# rational order bookkeeping
# ---------------------------------------------------------------------------


def test_order_spec_parse_and_labels():
    a = RationalOrderSpec.parse("1+1/4")
    assert a.kind == "one_plus_inv" and a.n_root == 4
    assert a.s == 1.25 and a.label() == "1+1/4"
    b = RationalOrderSpec.parse("1/2+1/3")
    assert b.kind == "inv_sum" and (b.n_root, b.n_root2) == (2, 3)
    assert b.fraction == Fraction(5, 6) and b.label() == "1/2+1/3"
    c = RationalOrderSpec.parse("3/2")
    assert c.kind == "one_plus_inv" and c.n_root == 2
    d = RationalOrderSpec.parse("1")
    assert d.kind == "inv_sum" and (d.n_root, d.n_root2) == (2, 2)
    e = RationalOrderSpec.parse("1.25")
    assert e.n_root == 4


def test_order_spec_rejections():
    with pytest.raises(ValidationError):
        RationalOrderSpec.parse("0.9")  # not 1/N + 1/N'
    with pytest.raises(ValidationError):
        RationalOrderSpec.parse("7/3")  # not 1 + 1/N
    with pytest.raises(ValidationError):
        RationalOrderSpec("one_plus_inv", 1)
    with pytest.raises(ValidationError):
        RationalOrderSpec("inv_sum", 2)


def test_order_spec_convergence_ranges():
    string = ModeBasis(String1D(1.0), 10)
    rect = ModeBasis(Rectangle2D(1.0, 1.0), 10)
    RationalOrderSpec("inv_sum", 2, 4).validate_for(string)  # s = 3/4 fine in 1D
    with pytest.raises(ValidationError):
        RationalOrderSpec("inv_sum", 2, 4).validate_for(rect)  # diverges in 2D
    with pytest.raises(ValidationError):
        RationalOrderSpec("inv_sum", 32, 64).validate_for(string)  # s < 1/2


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


def test_kernel_examples():
    assert kernel_second_order(1.0, 4.0, 1.5) == pytest.approx(1.0 / 6.0, rel=1e-15)
    for a, b in ((1.0, 4.0), (2.2, 2.3), (5.0, 0.01)):
        assert kernel_second_order(a, b, 1.0) == 0.0
    # cross-check against the pre-split identity preK = a^-s + b^-s + 4K
    for s in (0.75, 1.125, 1.5, 2.0):
        for a, b in ((1.0, 2.0), (3.0, 300.0), (7.0, 7.0000001)):
            pre = kernel_second_order_presplit(a, b, s)
            assert pre == pytest.approx(
                a ** (-s) + b ** (-s) + 4 * kernel_second_order(a, b, s), rel=1e-12
            )


def test_kernel_symmetry_bitexact():
    for s in (0.75, 1.5):
        for a, b in ((1.0, 4.0), (2.0, 2.0 + 1e-9), (0.02, 9000.0)):
            assert kernel_second_order(a, b, s) == kernel_second_order(b, a, s)
    mat = kernel_matrix(np.array([1.0, 2.0, 2.0, 50.0]), 1.25)
    assert np.array_equal(mat, mat.T)


def test_kernel_matrix_matches_scalar():
    eps = np.array([1.0, 1.0 + 1e-14, 3.7, 88.0])
    mat = kernel_matrix(eps, 1.125)
    for i in range(4):
        for j in range(4):
            assert mat[i, j] == pytest.approx(
                kernel_second_order(eps[i], eps[j], 1.125), rel=1e-14
            )


def test_presplit_diagonal_limit():
    # 2(2s-1) eps^-s, numerically from both sides at eps_m = eps_n (1 +- 1e-6)
    for s in (0.75, 1.5):
        for e in (1.0, 13.0):
            limit = 2 * (2 * s - 1) * e ** (-s)
            up = kernel_second_order_presplit(e, e * (1 + 1e-6), s)
            dn = kernel_second_order_presplit(e, e * (1 - 1e-6), s)
            assert up == pytest.approx(limit, rel=1e-5)
            assert dn == pytest.approx(limit, rel=1e-5)
            assert kernel_second_order_presplit(e, e, s) == pytest.approx(limit, rel=1e-14)


def test_kernel_regularity_error_is_linear_in_h():
    s, e = 1.5, 1.0
    limit = 2 * (2 * s - 1) * e ** (-s)
    hs = np.array([1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8])
    errs = np.array(
        [abs(kernel_second_order_presplit(e, e * (1 + h), s) - limit) for h in hs]
    )
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 0.9 < slope < 1.1


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------


def test_tail_1d_closed_form():
    basis = ModeBasis(String1D(1.0), 1000)
    tail = tail_estimate(basis, 1.5, 1000)
    assert tail == pytest.approx(math.pi**-3 / (2 * 1000.5**2), rel=1e-14)


def test_tail_large_s_underflows_to_zero():
    basis = ModeBasis(String1D(1.0), 100)
    assert tail_estimate(basis, 10.0, 100) < 1e-30


def test_tail_2d_monotone_to_zero():
    basis = ModeBasis(Rectangle2D(1.0, 1.0), 4000)
    tails = [tail_estimate(basis, 1.25, m) for m in (100, 400, 1600, 4000)]
    assert all(t > 0 for t in tails)
    assert tails == sorted(tails, reverse=True)


def test_tail_rejects_divergent():
    with pytest.raises(ValidationError):
        tail_estimate(ModeBasis(String1D(1.0), 10), 0.5, 10)
    with pytest.raises(ValidationError):
        tail_estimate(ModeBasis(Rectangle2D(1.0, 1.0), 10), 1.0, 10)


def test_tail_2d_tracks_true_remainder():
    # +-50% contract, checked against exact lattice enumeration
    basis = ModeBasis(Rectangle2D(1.0, 1.0), 4000)
    big = ModeBasis(Rectangle2D(1.0, 1.0), 200000)
    eigs = big.eigenvalues()
    for m, s in ((500, 1.5), (2000, 1.25)):
        exact = float(np.sum(eigs[m:] ** (-s))) + tail_estimate(big, s, 200000)
        est = tail_estimate(basis, s, m)
        assert abs(est - exact) < 0.5 * exact


# ---------------------------------------------------------------------------
# closed form and traces
# ---------------------------------------------------------------------------


def test_closed_form_homogeneous_anchor():
    basis = ModeBasis(String1D(1.0), 400)
    zero = DensityPerturbation(FourierCosine(()), 0.0)
    table = build_sigma_table(basis, zero, 2)
    res = z_closed_form(1.5, table, basis, zero)
    assert res.z1 == 0.0 and res.z2 == 0.0
    assert abs(res.z_total - ZETA3 / math.pi**3) <= 2 * res.tail_estimate


def test_closed_form_lambda_zero():
    basis = ModeBasis(String1D(1.0), 60)
    dens = DensityPerturbation(COS2, 0.0)
    table = build_sigma_table(basis, dens, 2)
    res = z_closed_form(RationalOrderSpec.parse("3/2"), table, basis, dens)
    assert res.z1 == 0.0 and res.z2 == 0.0


def test_first_order_sign_for_added_mass():
    # sigma(x) = sin^2(pi x) = 1/2 - cos(2 pi x)/2 >= 0: mass added, Z^(1) > 0
    profile = FourierCosine((0.5, 0.0, -0.5))
    basis = ModeBasis(String1D(1.0), 80)
    dens = DensityPerturbation(profile, 0.2)
    table = build_sigma_table(basis, dens, 2)
    for order in ("3/2", "1", "5/4"):
        res = z_closed_form(RationalOrderSpec.parse(order), table, basis, dens)
        assert res.z1 > 0.0


def test_resummed_diagonal_mode():
    basis = ModeBasis(String1D(1.0), 60)
    dens = DensityPerturbation(COS2, 0.2)
    table = build_sigma_table(basis, dens, 2)
    plain = z_closed_form(1.5, table, basis, dens)
    res = z_closed_form(1.5, table, basis, dens, diagonal_mode=RESUMMED)
    assert res.diagonal_mode == RESUMMED
    assert res.resummation_correction != 0.0
    assert res.z_total == pytest.approx(
        res.z0 + res.z1 + res.z2 + res.resummation_correction, rel=1e-15
    )
    # correction is a higher-order-in-lambda effect
    assert abs(res.z_total - plain.z_total) < 1e-4 * abs(plain.z_total)


def test_result_invariants():
    basis = ModeBasis(String1D(1.0), 60)
    dens = DensityPerturbation(COS2, 0.1)
    table = build_sigma_table(basis, dens, 2)
    res = z_closed_form(RationalOrderSpec.parse("3/2"), table, basis, dens)
    assert res.z_total == res.z0 + res.z1 + res.z2
    assert res.tail_estimate >= 0.0
    assert res.order_label == "1+1/2"
    assert res.truncation == 60


def test_route_agreement_one_plus_inv():
    dens = DensityPerturbation(COS2, 0.1)
    table = reference_table()
    for n in (2, 3, 4):
        spec = RationalOrderSpec("one_plus_inv", n)
        closed = z_closed_form(spec, table, STRING, dens)
        trace = z_via_trace_one_plus_inv(n, table, STRING, dens)
        assert abs(closed.z_total - trace.z_total) <= 1e-9 * abs(closed.z_total)
        # order-by-order agreement, not only the total
        assert trace.z0 == pytest.approx(closed.z0, rel=1e-13)
        assert trace.z1 == pytest.approx(closed.z1, rel=1e-12)
        assert trace.z2 == pytest.approx(closed.z2, rel=1e-10)


def test_route_agreement_inv_sum():
    dens = DensityPerturbation(COS2, 0.1)
    table = reference_table()
    for n, n2 in ((2, 2), (2, 3), (2, 4), (3, 4)):
        spec = RationalOrderSpec("inv_sum", n, n2)
        closed = z_closed_form(spec, table, STRING, dens)
        trace = z_via_trace_inv_sum(n, n2, table, STRING, dens)
        assert abs(closed.z_total - trace.z_total) <= 1e-9 * abs(closed.z_total)


def test_route_agreement_2d_one_plus_inv():
    basis = ModeBasis(Rectangle2D(1.0, 1.0), 400)
    prof = Separable2D(((COS2, COS2),))
    dens = DensityPerturbation(prof, 0.1)
    table = build_sigma_table(basis, prof, 2)
    closed = z_closed_form(RationalOrderSpec("one_plus_inv", 4), table, basis, dens)
    trace = z_via_trace_one_plus_inv(4, table, basis, dens)
    assert abs(closed.z_total - trace.z_total) <= 1e-9 * abs(closed.z_total)


def test_trace_zero_profile_reduces_to_plain_sum():
    zero = DensityPerturbation(FourierCosine(()), 0.0)
    table = build_sigma_table(STRING, zero, 2)
    res = z_via_trace_one_plus_inv(3, table, STRING, zero)
    eps = STRING.eigenvalues()
    expected = float(np.sum(eps ** (-4.0 / 3.0))) + res.tail_estimate
    assert res.z_total == pytest.approx(expected, rel=1e-14)
    assert res.z1 == 0.0 and res.z2 == 0.0


def test_trace_inv_sum_rejects_2d():
    rect = ModeBasis(Rectangle2D(1.0, 1.0), 20)
    prof = Separable2D(((COS2, COS2),))
    dens = DensityPerturbation(prof, 0.05)
    table = build_sigma_table(rect, prof, 2)
    with pytest.raises(ValidationError):
        z_via_trace_inv_sum(2, 2, table, rect, dens)


def test_closed_form_rejects_bad_inputs():
    dens = DensityPerturbation(COS2, 0.1)
    table = build_sigma_table(ModeBasis(String1D(1.0), 20), dens, 1)
    with pytest.raises(ValidationError):
        z_closed_form(1.5, table, ModeBasis(String1D(1.0), 20), dens)  # J < 2
    table2 = build_sigma_table(ModeBasis(String1D(1.0), 20), dens, 2)
    with pytest.raises(ValidationError):
        z_closed_form(0.4, table2, ModeBasis(String1D(1.0), 20), dens)  # divergent
    bad = DensityPerturbation(COS2, 1.01)
    with pytest.raises(ValidationError):
        z_closed_form(1.5, table2, ModeBasis(String1D(1.0), 20), bad)
