"""Spectral zeta functions of rational order for heterogeneous quantum billiards.

Z(s) = sum_n E_n^{-s} is computed to second order in the density perturbation
by three mutually validating perturbative routes (a shared closed form and two
trace decompositions over fractional-order Green's function coefficients) and
checked against a brute-force generalized-eigenproblem oracle.
"""

from .basis import (
    DensityPerturbation,
    FourierCosine,
    ModeBasis,
    Polynomial,
    Rectangle2D,
    Separable2D,
    SigmaPowerTable,
    String1D,
    Tabulated,
    build_sigma_table,
    eigenvalue,
    sigma_power_element,
)
from .coefficients import (
    GreenCoefficientSet,
    build_Q_order,
    q_closed_form,
    q_generic_recursion,
    q_resummed_approx,
    verify_convolution,
)
from .errors import (
    BillzetaError,
    ConfigError,
    FactorizationError,
    InsufficientDataError,
    NumericalError,
    QuadratureError,
    ValidationError,
)
from .kernels import delta, eta, xi
from .oracle import (
    GeneralizedProblem,
    assemble,
    convergence_order_fit,
    solve_spectrum,
    z_direct,
)
from .sumrules import (
    RationalOrderSpec,
    SumRuleResult,
    kernel_second_order,
    kernel_second_order_presplit,
    tail_estimate,
    z_closed_form,
    z_via_trace_inv_sum,
    z_via_trace_one_plus_inv,
)

__version__ = "0.1.0"

__all__ = [
    "BillzetaError",
    "ConfigError",
    "DensityPerturbation",
    "FactorizationError",
    "FourierCosine",
    "GeneralizedProblem",
    "GreenCoefficientSet",
    "InsufficientDataError",
    "ModeBasis",
    "NumericalError",
    "Polynomial",
    "QuadratureError",
    "RationalOrderSpec",
    "Rectangle2D",
    "Separable2D",
    "SigmaPowerTable",
    "String1D",
    "SumRuleResult",
    "Tabulated",
    "ValidationError",
    "assemble",
    "build_Q_order",
    "build_sigma_table",
    "convergence_order_fit",
    "delta",
    "eigenvalue",
    "eta",
    "kernel_second_order",
    "kernel_second_order_presplit",
    "q_closed_form",
    "q_generic_recursion",
    "q_resummed_approx",
    "sigma_power_element",
    "solve_spectrum",
    "tail_estimate",
    "verify_convolution",
    "xi",
    "z_closed_form",
    "z_direct",
    "z_via_trace_inv_sum",
    "z_via_trace_one_plus_inv",
]
