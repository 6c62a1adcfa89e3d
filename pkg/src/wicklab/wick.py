"""Wick powers (Appell polynomials) of a random variable from its moments.

``P_0 = 1`` and ``P_m(x) = x^m - m! sum_{i=1}^m P_{m-i}(x)/(m-i)! * mu_i/i!``.
Internally the recursion runs on ``Q_m = P_m / m!``, which keeps float
coefficients of moderate size for large ``m``.  Exact rational or integer
moments are carried through with :class:`~fractions.Fraction`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from .errors import WicklabError
from .funcgrid import GridFunction
from .moments import MomentSpec, moment_bruteforce, moment_partition_formula, phi_eval

__all__ = [
    "WickPolynomial",
    "bernoulli_moments",
    "gaussian_moments",
    "wick_polynomial",
    "wick_polynomials",
    "wick_power_of_noise",
    "noise_moments",
    "stochastic_exponent_partial",
    "stochastic_exponent_closed",
]


@dataclass(frozen=True, eq=False)
class WickPolynomial:
    """Monic ``P_m``; ``coeffs[i]`` multiplies ``x**i``.

    When the moments were exact rationals, ``exact_coeffs`` and
    ``exact_moments`` hold the unrounded values.
    """

    degree: int
    coeffs: np.ndarray = field(repr=False)
    base_moments: np.ndarray = field(repr=False)
    exact_coeffs: tuple[Fraction, ...] | None = field(default=None, repr=False)
    exact_moments: tuple[Fraction, ...] | None = field(default=None, repr=False)

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def derivative(self) -> np.ndarray:
        if self.degree == 0:
            return np.zeros(1)
        return np.polynomial.polynomial.polyder(self.coeffs)

    def mean(self):
        """``sum_i coeffs[i] * mu_i``, exact when possible; zero for ``degree >= 1``."""
        if self.exact_coeffs is not None:
            return sum(c * m for c, m in zip(self.exact_coeffs, self.exact_moments))
        return float(np.dot(self.coeffs, self.base_moments[: self.degree + 1]))


def bernoulli_moments(m: int) -> list[int]:
    """Moments of a single symmetric sign: 1, 0, 1, 0, ..."""
    return [1 if i % 2 == 0 else 0 for i in range(m + 1)]


def gaussian_moments(m: int) -> list[int]:
    """Standard normal moments: ``(i-1)!!`` for even ``i``, else 0."""
    out = []
    for i in range(m + 1):
        out.append(math.prod(range(i - 1, 0, -2)) if i % 2 == 0 else 0)
    return out


def _is_exact(values: Sequence) -> bool:
    return all(isinstance(v, (int, Rational)) and not isinstance(v, bool) for v in values)


def _normalized(moments: Sequence) -> list[list]:
    """Coefficient lists of ``Q_0..Q_M`` with ``Q_m = P_m / m!``."""
    exact = _is_exact(moments)
    one = Fraction(1) if exact else 1.0
    mus = [Fraction(m) if exact else float(m) for m in moments]
    fact = [one]
    for i in range(1, len(mus)):
        fact.append(fact[-1] * i)
    scaled = [mu / fact[i] for i, mu in enumerate(mus)]
    qs: list[list] = [[one]]
    for m in range(1, len(mus)):
        coeffs = [0 * one] * (m + 1)
        coeffs[m] = one / fact[m]
        for i in range(1, m + 1):
            if scaled[i] == 0:
                continue
            for j, c in enumerate(qs[m - i]):
                coeffs[j] -= c * scaled[i]
        qs.append(coeffs)
    return qs


def _check_moments(moments: Sequence) -> None:
    if len(moments) == 0:
        raise ValueError("at least mu_0 is required")
    if moments[0] != 1:
        raise WicklabError(f"mu_0 must equal 1, got {moments[0]}")


def wick_polynomials(moments: Sequence) -> list[WickPolynomial]:
    """``P_0 .. P_M`` for ``M = len(moments) - 1``."""
    _check_moments(moments)
    exact = _is_exact(moments)
    base = np.asarray([float(m) for m in moments])
    out = []
    fact = 1
    for m, q in enumerate(_normalized(moments)):
        if m:
            fact *= m
        coeffs = [c * fact for c in q]
        # Monic by construction; avoid the (1/m!) * m! rounding.
        coeffs[m] = Fraction(1) if exact else 1.0
        out.append(
            WickPolynomial(
                degree=m,
                coeffs=np.asarray([float(c) for c in coeffs]),
                base_moments=base,
                exact_coeffs=tuple(coeffs) if exact else None,
                exact_moments=tuple(Fraction(v) for v in moments) if exact else None,
            )
        )
    return out


def wick_polynomial(moments: Sequence) -> WickPolynomial:
    """``P_m`` for ``m = len(moments) - 1``."""
    return wick_polynomials(moments)[-1]


def noise_moments(f: GridFunction, m: int, engine: str = "formula") -> list[float]:
    """``[E phi(f)^i for i in 0..m]`` from the chosen exact engine."""
    if engine not in ("formula", "bruteforce"):
        raise ValueError(f"unknown moment engine {engine!r}")
    out = [1.0]
    for i in range(1, m + 1):
        spec = MomentSpec.of((f, i))
        out.append(moment_partition_formula(spec) if engine == "formula" else moment_bruteforce(spec))
    return out


def wick_power_of_noise(f: GridFunction, m: int, engine: str = "formula") -> WickPolynomial:
    """``:phi^m(f):`` as a polynomial in the scalar ``phi(f)``."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    return wick_polynomial(noise_moments(f, m, engine))


def stochastic_exponent_partial(alpha: float, moments: Sequence, x: float, N: int | None = None) -> float:
    """``sum_{n=0}^{N} alpha^n P_n(x) / n!`` using the first ``N+1`` moments."""
    _check_moments(moments)
    if N is None:
        N = len(moments) - 1
    if N < 0 or N > len(moments) - 1:
        raise ValueError(f"N={N} needs moments up to order {N}")
    total = 0.0
    for n, q in enumerate(_normalized(moments[: N + 1])):
        total += alpha**n * float(np.polynomial.polynomial.polyval(x, [float(c) for c in q]))
    return total


def _log_cosh(y: np.ndarray) -> np.ndarray:
    a = np.abs(y)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def stochastic_exponent_closed(alpha: float, f: GridFunction, eps):
    """``exp(alpha phi(f)) / prod_k cosh(alpha f(k/n) / sqrt(n))``; ``eps`` may be batched."""
    phi = phi_eval(f, eps)
    log_norm = float(np.sum(_log_cosh(alpha * f.values / math.sqrt(f.n))))
    log_val = alpha * np.asarray(phi) - log_norm
    if np.any(log_val > 709.0):
        raise OverflowError(f"stochastic exponent overflows for alpha={alpha}")
    out = np.exp(log_val)
    return float(out) if out.ndim == 0 else out
