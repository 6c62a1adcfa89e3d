"""k-linear forms over Bernoulli signs and their Gaussian (Hermite) limits.

``A_k^n(eps) = n^(-k/2) sum_{i_1..i_k pairwise distinct} f(i_1/n, ..., i_k/n) eps_i1 ... eps_ik``.

For ``f`` written in a basis, ``f = sum c_m psi_m1 (x) ... (x) psi_mk``, the
limit is the Wick polynomial ``sum c_m (psi_m1, xi) * ... * (psi_mk, xi)``;
moments of such functionals are computed by Isserlis pairing with the basis
Gram matrix, never pairing two factors of the same Wick monomial.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import CapacityError, GridMismatchError
from .funcgrid import Expr, GridFunction, parse_expr, riemann_inner_product, sample
from .moments import (
    DEFAULT_ORACLE_CAP,
    McConfig,
    _mean_and_se,
    exact_expectation,
    montecarlo_samples,
    phi_eval,
)
from .partitions import VertexLabeling, enumerate_pair_partitions, enumerate_set_partitions

DEFAULT_GRAM_RESOLUTION = 1 << 20
DEFAULT_EXPANSION_CAP = 200_000

__all__ = [
    "MultiIndexCoeffs",
    "KForm",
    "cosine_basis",
    "kform_eval",
    "kform_orthogonality_check",
    "kform_second_moment_exact",
    "hermite_polynomial",
    "hermite_functional_moment",
    "kform_limit_check",
    "clt_ks_distance",
    "joint_cf_distance",
]


def cosine_basis(M: int) -> list[str]:
    """``1, sqrt(2) cos(pi x), ..., sqrt(2) cos((M-1) pi x)``: orthonormal on [0,1]."""
    return ["1"] + [f"sqrt(2)*cos({m}*pi*x)" for m in range(1, M)]


@dataclass(frozen=True, eq=False)
class MultiIndexCoeffs:
    """``f(x_1..x_k) = sum c[m] psi_m1(x_1) ... psi_mk(x_k)``; indices are 1-based."""

    arity: int
    basis: tuple[Expr, ...]
    coeffs: Mapping[tuple[int, ...], float]
    sources: tuple[str, ...] = field(default=(), repr=False)

    def __post_init__(self):
        basis = tuple(parse_expr(b) if isinstance(b, str) else b for b in self.basis)
        if len(set(basis)) != len(basis):
            raise ValueError("basis functions must be pairwise distinct")
        coeffs = {tuple(int(i) for i in m): float(c) for m, c in dict(self.coeffs).items() if c != 0}
        for m in coeffs:
            if len(m) != self.arity or not all(1 <= i <= len(basis) for i in m):
                raise ValueError(f"bad multi-index {m} for arity {self.arity} and {len(basis)} basis functions")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def product(cls, basis: Sequence[Expr | str], indices: Sequence[int], c: float = 1.0) -> "MultiIndexCoeffs":
        return cls(len(indices), tuple(basis), {tuple(indices): c})

    def basis_grids(self, n: int) -> list[GridFunction]:
        return [sample(b, n, 1) for b in self.basis]

    def grid(self, n: int) -> GridFunction:
        """The full arity-``k`` grid function (``n**k`` values)."""
        grids = [g.values for g in self.basis_grids(n)]
        out = np.zeros((n,) * self.arity)
        for m, c in self.coeffs.items():
            term = grids[m[0] - 1]
            for i in m[1:]:
                term = np.multiply.outer(term, grids[i - 1])
            out = out + c * term
        return GridFunction(n, self.arity, out)

    def gram(self, resolution: int = DEFAULT_GRAM_RESOLUTION) -> np.ndarray:
        gs = self.basis_grids(resolution)
        return np.array([[riemann_inner_product(a, b) for b in gs] for a in gs])


@dataclass(frozen=True, eq=False)
class KForm:
    """``A_k^n`` for a grid function of arity ``k`` or a basis expansion evaluated on ``n``."""

    f: GridFunction | None = None
    coeffs: MultiIndexCoeffs | None = None
    n: int | None = None

    def __post_init__(self):
        if (self.f is None) == (self.coeffs is None):
            raise ValueError("give exactly one of f or coeffs")
        if self.f is not None:
            object.__setattr__(self, "n", self.f.n)
        elif self.n is None:
            raise ValueError("a basis expansion needs a grid size n")

    @property
    def k(self) -> int:
        return self.f.arity if self.f is not None else self.coeffs.arity

    def grid(self) -> GridFunction:
        return self.f if self.f is not None else self.coeffs.grid(self.n)


def _distinct_mask(n: int, k: int) -> np.ndarray:
    idx = np.indices((n,) * k)
    mask = np.ones((n,) * k, dtype=bool)
    for a in range(k):
        for b in range(a + 1, k):
            mask &= idx[a] != idx[b]
    return mask


def _direct(form: KForm, eps: np.ndarray) -> np.ndarray:
    f = form.grid()
    n, k = f.n, f.arity
    g = np.where(_distinct_mask(n, k), f.values, 0.0) * n ** (-k / 2)
    t = np.tensordot(eps, g, axes=(1, 0))
    for _ in range(k - 1):
        t = np.einsum("bi,bi...->b...", eps, t)
    return t


def _mobius(part) -> int:
    out = 1
    for b in part.blocks:
        out *= (-1) ** (len(b) - 1) * math.factorial(len(b) - 1)
    return out


def _product_form(form: KForm, eps: np.ndarray) -> np.ndarray:
    # Distinct-index sum by Mobius inversion over set partitions of the k slots:
    # sum_{distinct} = sum_pi mu(pi) prod_{B in pi} sum_i prod_{t in B} h_t(i).
    n, k = form.n, form.k
    grids = [g.values for g in form.coeffs.basis_grids(n)]
    parts = [(p, _mobius(p)) for p in enumerate_set_partitions(k)]
    out = np.zeros(eps.shape[0])
    for m, c in form.coeffs.coeffs.items():
        acc = np.zeros(eps.shape[0])
        for part, mu in parts:
            term = np.full(eps.shape[0], float(mu))
            for b in part.blocks:
                g = np.ones(n)
                for slot in b:
                    g = g * grids[m[slot - 1] - 1]
                scale = n ** (-len(b) / 2)
                term = term * ((eps @ g) * scale if len(b) % 2 else g.sum() * scale)
            acc += term
        out += c * acc
    return out


def kform_eval(form: KForm, eps, method: str = "auto"):
    """Evaluate ``A_k^n`` at one sign vector or a batch of shape ``(B, n)``.

    ``method`` is ``"direct"`` (masked ``n**k`` tensor), ``"product"``
    (inclusion-exclusion on a basis expansion) or ``"auto"``.
    """
    eps = np.asarray(eps, dtype=np.float64)
    single = eps.ndim == 1
    batch = eps[None, :] if single else eps
    if batch.shape[1] != form.n:
        raise GridMismatchError(f"sign vector length {batch.shape[1]} != n={form.n}")
    if form.k > form.n:
        warnings.warn(f"k={form.k} > n={form.n}: the distinct-index sum is empty", stacklevel=2)
        out = np.zeros(batch.shape[0])
    elif form.k == 1 and form.f is not None:
        out = np.atleast_1d(phi_eval(form.f, batch))
    else:
        if method == "auto":
            method = "product" if form.coeffs is not None else "direct"
        if method == "product":
            if form.coeffs is None:
                raise ValueError("product evaluation needs a basis expansion")
            out = _product_form(form, batch)
        elif method == "direct":
            out = _direct(form, batch)
        else:
            raise ValueError(f"unknown method {method!r}")
    return float(out[0]) if single else out


def kform_orthogonality_check(f_k: KForm, f_m: KForm, cap: int = DEFAULT_ORACLE_CAP) -> float:
    """Exact ``E[A_k A_m]`` over every sign vector."""
    if f_k.n != f_m.n:
        raise GridMismatchError("both forms must share n")
    return exact_expectation(lambda e: kform_eval(f_k, e) * kform_eval(f_m, e), f_k.n, cap)


def kform_second_moment_exact(form: KForm) -> float:
    """``E[(A_k^n)^2] = n^-k sum_{distinct i} f(i) sum_sigma f(sigma i)``, any ``n``."""
    f = form.grid()
    n, k = f.n, f.arity
    if k > n:
        return 0.0
    from itertools import permutations

    sym = sum(np.transpose(f.values, p) for p in permutations(range(k)))
    masked = np.where(_distinct_mask(n, k), f.values, 0.0)
    return float(np.sum(masked * sym) / n**k)


def hermite_polynomial(r: int) -> np.ndarray:
    """Probabilists' ``He_r`` coefficients, lowest degree first."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    prev, cur = [1], [0, 1]
    if r == 0:
        return np.array(prev, dtype=float)
    for j in range(1, r):
        nxt = [0] + cur
        for i, c in enumerate(prev):
            nxt[i] -= j * c
        prev, cur = cur, nxt
    return np.array(cur, dtype=float)


def _pairing_sum(indices: tuple[tuple[int, ...], ...], gram: np.ndarray) -> float:
    counts = [len(m) for m in indices]
    K = sum(counts)
    if K % 2:
        return 0.0
    flat = [i for m in indices for i in m]
    total = 0.0
    for part in enumerate_pair_partitions(K, VertexLabeling.from_counts(counts), True, cap=64):
        term = 1.0
        for a, b in part.blocks:
            term *= gram[flat[a - 1] - 1, flat[b - 1] - 1]
        total += term
    return total


def hermite_functional_moment(
    factors: Sequence[tuple[MultiIndexCoeffs, int]],
    gram: np.ndarray | None = None,
    resolution: int = DEFAULT_GRAM_RESOLUTION,
    max_terms: int = DEFAULT_EXPANSION_CAP,
) -> float:
    """``E[prod_j F_j(xi,...,xi)^{p_j}]`` for infinite-dimensional Hermite functionals.

    All functionals must share one basis.  ``gram`` defaults to Riemann sums
    of the basis at ``resolution`` points.
    """
    if not factors:
        return 1.0
    basis = factors[0][0].basis
    if any(c.basis != basis for c, _ in factors):
        raise ValueError("all functionals must share the same basis")
    if gram is None:
        gram = factors[0][0].gram(resolution)
    copies = [c for c, p in factors for _ in range(p)]
    supports = [list(c.coeffs.items()) for c in copies]
    n_terms = math.prod(len(s) for s in supports)
    if n_terms > max_terms:
        raise CapacityError(f"{n_terms} expanded monomial products exceed the cap {max_terms}")
    memo: dict[tuple, float] = {}
    total = 0.0
    for combo in product(*supports):
        key = tuple(sorted(tuple(sorted(m)) for m, _ in combo))
        if key not in memo:
            memo[key] = _pairing_sum(key, gram)
        total += math.prod(c for _, c in combo) * memo[key]
    return total


def kform_limit_check(
    coeffs: MultiIndexCoeffs,
    n_values: Sequence[int],
    mc: McConfig,
    exact_cap: int = 14,
    gram: np.ndarray | None = None,
) -> list[dict]:
    """Finite-``n`` moments of ``A_k^n`` (orders 1..3) against the Gaussian-chaos limit.

    The second moment is always exact.  Orders 1 and 3 are exact by sign
    enumeration for ``n <= exact_cap`` and Monte Carlo otherwise
    (``*_se`` is then the standard error, else 0).
    """
    limits = {p: hermite_functional_moment([(coeffs, p)], gram) for p in (1, 2, 3)}
    rows = []
    for n in n_values:
        form = KForm(coeffs=coeffs, n=n)
        second = kform_second_moment_exact(form) if n**coeffs.arity <= 4_000_000 else None
        if n <= exact_cap:
            first = exact_expectation(lambda e: kform_eval(form, e), n)
            third = exact_expectation(lambda e: kform_eval(form, e) ** 3, n)
            first_se = third_se = 0.0
            if second is None:
                second = exact_expectation(lambda e: kform_eval(form, e) ** 2, n)
        else:
            vals = montecarlo_samples(lambda e: kform_eval(form, e), n, mc)
            first, first_se = _mean_and_se(vals)
            third, third_se = _mean_and_se(vals**3)
            if second is None:
                second, _ = _mean_and_se(vals**2)
        rows.append(
            {
                "n": n,
                "mean": first,
                "mean_se": first_se,
                "mean_limit": limits[1],
                "second": second,
                "second_limit": limits[2],
                "second_gap": abs(second - limits[2]),
                "third": third,
                "third_se": third_se,
                "third_limit": limits[3],
                "third_gap": abs(third - limits[3]),
            }
        )
    return rows


def clt_ks_distance(f: GridFunction, cfg: McConfig) -> float:
    """KS distance between seeded samples of ``phi(f)`` and ``N(0, <f, f>_n)``."""
    samples = montecarlo_samples(lambda e: phi_eval(f, e), f.n, cfg)
    sd = math.sqrt(riemann_inner_product(f, f))
    return float(stats.kstest(samples, "norm", args=(0.0, sd)).statistic)


def joint_cf_distance(
    f: GridFunction,
    g: GridFunction,
    cfg: McConfig,
    t_max: float = 3.0,
    points: int = 13,
) -> float:
    """Max gap between the empirical and Gaussian joint characteristic functions.

    Evaluated on a ``points x points`` grid of ``t`` in ``[-t_max, t_max]^2``;
    the Gaussian covariance is the Riemann Gram matrix of ``(f, g)``.
    """
    xy = montecarlo_samples(lambda e: np.stack([phi_eval(f, e), phi_eval(g, e)], axis=1), f.n, cfg)
    cov = np.array(
        [
            [riemann_inner_product(f, f), riemann_inner_product(f, g)],
            [riemann_inner_product(g, f), riemann_inner_product(g, g)],
        ]
    )
    ts = np.linspace(-t_max, t_max, points)
    worst = 0.0
    for t1 in ts:
        t = np.stack([np.full_like(ts, t1), ts], axis=1)
        emp = np.exp(1j * (xy @ t.T)).mean(axis=0)
        gauss = np.exp(-0.5 * np.einsum("ti,ij,tj->t", t, cov, t))
        worst = max(worst, float(np.max(np.abs(emp - gauss))))
    return worst
