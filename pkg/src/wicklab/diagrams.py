"""Expectations of products of Wick powers ``E[:phi^n1(f1): ... :phi^nN(fN):]``.

Two diagram sums plus an independent check:

* :func:`wick_moment_traversal` enumerates every diagram (even partition
  with no single-factor block, one traversal per block) and adds
  ``prod_s (-1)^(m_s - 1) sum_k prod_{i in s} f_i(k/n) n^(-1/2)``.
* :func:`wick_moment_closed` replaces each block's traversal sum by its
  closed coefficient ``block_coefficient(|s|)``.
* :func:`wick_moment_oracle` evaluates the Wick polynomials pathwise on
  every sign vector.

Each vertex carries ``n^(-1/2)``, so a block of size ``s`` scales as
``n^(1 - s/2)``; only pair blocks survive as ``n`` grows, and
:func:`gaussian_wick_moment` keeps exactly those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import CapacityError
from .funcgrid import Expr, GridFunction, evaluate, parse_expr, riemann_inner_product, sample, weighted_grid_sum
from .moments import DEFAULT_ORACLE_CAP, MomentSpec, exact_expectation, phi_eval
from .numbers import block_coefficient
from .partitions import (
    DEFAULT_PARTITION_CAP,
    Diagram,
    EvenPartition,
    enumerate_diagrams,
    enumerate_even_partitions,
    enumerate_pair_partitions,
)
from .wick import wick_power_of_noise

DEFAULT_TRAVERSAL_BUDGET = 2_000_000

__all__ = [
    "WickMomentSpec",
    "DiagramTerm",
    "wick_moment_traversal",
    "wick_moment_closed",
    "wick_moment_oracle",
    "gaussian_wick_moment",
    "convergence_study",
    "block_sign_sums",
    "term_to_dict",
]


class WickMomentSpec(MomentSpec):
    """Factors ``(f_i, n_i)`` standing for ``:phi^{n_i}(f_i):``."""


@dataclass(frozen=True)
class DiagramTerm:
    diagram: Diagram
    block_values: tuple[float, ...]
    value: float

    @property
    def sign(self) -> int:
        return self.diagram.sign


def _block_sums(spec: MomentSpec):
    """Memoised ``weighted_grid_sum`` keyed by the multiset of factor labels."""
    funcs = spec.vertex_functions()
    labels = spec.labeling.multiplier_of
    cache: dict[tuple[int, ...], float] = {}

    def value(block: Sequence[int]) -> float:
        key = tuple(sorted(labels[v - 1] for v in block))
        if key not in cache:
            cache[key] = weighted_grid_sum([funcs[v - 1] for v in block])
        return cache[key]

    return value


def _admissible(spec: MomentSpec, cap: int) -> list[EvenPartition]:
    return list(enumerate_even_partitions(spec.degree, spec.labeling, True, cap))


def count_diagrams(partitions: Sequence[EvenPartition]) -> int:
    return sum(math.prod(math.factorial(len(b) - 1) for b in p.blocks) for p in partitions)


def wick_moment_traversal(
    spec: MomentSpec,
    cap: int = DEFAULT_PARTITION_CAP,
    budget: int = DEFAULT_TRAVERSAL_BUDGET,
    keep_terms: bool = True,
) -> tuple[float, list[DiagramTerm]]:
    """Sum of ``I(G)`` over all diagrams; the per-diagram terms are returned too."""
    if spec.degree % 2:
        return 0.0, []
    parts = _admissible(spec, cap)
    count = count_diagrams(parts)
    if count > budget:
        raise CapacityError(f"{count} diagrams exceed the traversal budget {budget}")
    value = _block_sums(spec)
    total = 0.0
    terms: list[DiagramTerm] = []
    for part in parts:
        sums = tuple(value(b) for b in part.blocks)
        for diagram in enumerate_diagrams(part):
            vals = tuple(t.sign * s for t, s in zip(diagram.traversals, sums))
            term = math.prod(vals)
            total += term
            if keep_terms:
                terms.append(DiagramTerm(diagram, vals, term))
    return total, terms


def wick_moment_closed(spec: MomentSpec, cap: int = DEFAULT_PARTITION_CAP) -> float:
    """Admissible even partitions weighted by closed block coefficients."""
    if spec.degree % 2:
        return 0.0
    value = _block_sums(spec)
    total = 0.0
    for part in _admissible(spec, cap):
        term = 1.0
        for b in part.blocks:
            term *= float(block_coefficient(len(b))) * value(b)
        total += term
    return total


def wick_moment_oracle(spec: MomentSpec, cap: int = DEFAULT_ORACLE_CAP, workers: int | None = None) -> float:
    """Average of ``prod_i P_{n_i}(phi(f_i))`` over all ``2**n`` sign vectors.

    The polynomials are built from brute-force moments, so this path shares
    no partition code with the diagram sums.
    """
    if spec.n > cap:
        raise CapacityError(f"n={spec.n} exceeds the brute-force oracle cap {cap}")
    polys = [(f, wick_power_of_noise(f, q, engine="bruteforce")) for f, q in spec.factors]

    def integrand(eps):
        out = np.ones(eps.shape[0])
        for f, p in polys:
            out = out * p(phi_eval(f, eps))
        return out

    return exact_expectation(integrand, spec.n, cap, workers)


def gaussian_wick_moment(
    spec: MomentSpec,
    gram: np.ndarray | None = None,
    cap: int = DEFAULT_PARTITION_CAP,
) -> float:
    """Isserlis sum over matchings with no pair inside one factor.

    ``gram[a, b]`` is the covariance of factors ``a`` and ``b``; by default the
    same-grid Riemann sums ``riemann_inner_product(f_a, f_b)``.
    """
    K = spec.degree
    if K % 2:
        return 0.0
    if gram is None:
        fs = [f for f, _ in spec.factors]
        gram = np.array([[riemann_inner_product(a, b) for b in fs] for a in fs])
    labels = spec.labeling.multiplier_of
    total = 0.0
    for part in enumerate_pair_partitions(K, spec.labeling, True, cap):
        term = 1.0
        for a, b in part.blocks:
            term *= gram[labels[a - 1] - 1, labels[b - 1] - 1]
        total += term
    return float(total)


def quadrature_gram(exprs: Sequence[Expr]) -> np.ndarray:
    """``<f_a, f_b>`` on [0,1] by adaptive quadrature."""
    from scipy.integrate import quad

    m = len(exprs)
    out = np.zeros((m, m))
    for a in range(m):
        for b in range(a, m):
            val, _ = quad(lambda x: float(evaluate(exprs[a], x) * evaluate(exprs[b], x)), 0.0, 1.0, limit=200)
            out[a, b] = out[b, a] = val
    return out


def convergence_study(
    template: Sequence[tuple[Expr | str, int]],
    n_values: Sequence[int],
    quadrature: bool = False,
    cap: int = DEFAULT_PARTITION_CAP,
) -> list[dict]:
    """Bernoulli diagram sum against its Gaussian pairing limit for each ``n``.

    Rows carry ``n, bernoulli, gaussian, abs_error, error_times_n``.
    """
    exprs = [parse_expr(e) if isinstance(e, str) else e for e, _ in template]
    powers = [int(q) for _, q in template]
    gram = quadrature_gram(exprs) if quadrature else None
    rows = []
    for n in n_values:
        spec = WickMomentSpec(tuple((sample(e, n, 1), q) for e, q in zip(exprs, powers)))
        bern = wick_moment_closed(spec, cap)
        gauss = gaussian_wick_moment(spec, gram, cap)
        err = abs(bern - gauss)
        rows.append({"n": n, "bernoulli": bern, "gaussian": gauss, "abs_error": err, "error_times_n": err * n})
    return rows


def block_sign_sums(terms: Sequence[DiagramTerm]) -> dict[tuple[EvenPartition, tuple[int, ...]], int]:
    """Per (partition, block): sum of traversal signs over its distinct traversals."""
    seen: dict[tuple[EvenPartition, tuple[int, ...]], dict[tuple[int, ...], int]] = {}
    for term in terms:
        part = term.diagram.partition
        for t in term.diagram.traversals:
            seen.setdefault((part, t.block), {})[t.order] = t.sign
    return {key: sum(orders.values()) for key, orders in seen.items()}


def term_to_dict(term: DiagramTerm) -> dict:
    ts = term.diagram.traversals
    return {
        "blocks": [list(t.block) for t in ts],
        "traversals": [list(t.order) for t in ts],
        "ascents": [t.ascents for t in ts],
        "signs": [t.sign for t in ts],
        "block_values": list(term.block_values),
        "value": term.value,
    }
