"""Exact special numbers used by the Bernoulli-noise moment formulas.

Everything here is computed with :class:`fractions.Fraction` and Python
integers, so there is no rounding anywhere.  The memo tables are filled
under a lock and only ever grow, so concurrent callers see identical
values.
"""

from __future__ import annotations

import threading
from fractions import Fraction
from math import comb

__all__ = [
    "bernoulli_number",
    "eulerian_number",
    "eulerian_row",
    "block_coefficient",
    "alternating_eulerian_sum",
    "BlockCoefficient",
]

_lock = threading.Lock()
_bernoulli: list[Fraction] = [Fraction(1)]
_eulerian: list[list[int]] = [[1]]


def bernoulli_number(m: int) -> Fraction:
    """Return the Bernoulli number ``B_m`` with ``B_1 = -1/2``.

    Uses the recurrence ``sum_{j=0}^{m} C(m+1, j) B_j = 0``.
    """
    if m < 0:
        raise ValueError(f"Bernoulli index must be nonnegative, got {m}")
    with _lock:
        while len(_bernoulli) <= m:
            k = len(_bernoulli)
            acc = sum(comb(k + 1, j) * _bernoulli[j] for j in range(k))
            _bernoulli.append(-acc / (k + 1))
        return _bernoulli[m]


def eulerian_row(n: int) -> list[int]:
    """Return ``[E(n, 0), ..., E(n, max(n-1, 0))]``."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    with _lock:
        while len(_eulerian) <= n:
            k = len(_eulerian)
            prev = _eulerian[-1]
            row = []
            for l in range(k):
                a = (l + 1) * prev[l] if l < len(prev) else 0
                b = (k - l) * prev[l - 1] if 0 < l <= len(prev) else 0
                row.append(a + b)
            _eulerian.append(row)
        return list(_eulerian[n])


def eulerian_number(n: int, l: int) -> int:
    """Number of permutations of ``n`` elements with exactly ``l`` ascents.

    ``E(0, 0) = 1``; ``E(n, l) = 0`` for ``l >= n`` when ``n >= 1``.
    """
    if l < 0:
        return 0
    row = eulerian_row(n)
    return row[l] if l < len(row) else 0


def _check_even(size: int) -> int:
    if size < 2 or size % 2:
        raise ValueError(f"block size must be even and >= 2, got {size}")
    return size // 2


def block_coefficient(size: int) -> Fraction:
    """Weight of a partition block of even cardinality ``size = 2p``.

    ``(-1)**(p+1) |B_2p| 2**2p (2**2p - 1) / 2p``.  These are the cumulants of
    a symmetric +-1 variable: 1, -2, 16, -272, ...
    """
    p = _check_even(size)
    b = abs(bernoulli_number(2 * p))
    sign = 1 if p % 2 else -1
    return sign * b * 4**p * (4**p - 1) / (2 * p)


def alternating_eulerian_sum(block_size: int) -> Fraction:
    """``sum_l (-1)**l E(block_size - 1, l)`` as an exact rational."""
    _check_even(block_size)
    row = eulerian_row(block_size - 1)
    return Fraction(sum(v if l % 2 == 0 else -v for l, v in enumerate(row)))


class BlockCoefficient:
    """A block size paired with its exact coefficient."""

    __slots__ = ("block_size", "value")

    def __init__(self, block_size: int):
        self.block_size = block_size
        self.value = block_coefficient(block_size)

    def __repr__(self) -> str:
        return f"BlockCoefficient({self.block_size}, {self.value})"
