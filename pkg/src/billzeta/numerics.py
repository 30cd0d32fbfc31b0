"""Small numerical helpers: generalized binomials and careful summation."""

import numpy as np


def half_binomial(k: int) -> float:
    """Generalized binomial coefficient binom(1/2, k) by the product recurrence.

    Exact in rationals up to rounding; avoids factorial overflow/cancellation.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    b = 1.0
    for j in range(k):
        b *= (0.5 - j) / (j + 1)
    return b


def pairwise_sum(values) -> float:
    """Deterministic pairwise (tree) summation of a 1-D array.

    numpy's contiguous-array reduction is pairwise; route through it on a
    C-contiguous copy so the reduction order never depends on input strides.
    """
    arr = np.ascontiguousarray(values, dtype=float)
    return float(np.sum(arr))


class KahanAccumulator:
    """Compensated (Kahan) accumulator for matrices summed term by term."""

    def __init__(self, shape):
        self.total = np.zeros(shape)
        self._comp = np.zeros(shape)

    def add(self, term: np.ndarray) -> None:
        y = term - self._comp
        t = self.total + y
        self._comp = (t - self.total) - y
        self.total = t
