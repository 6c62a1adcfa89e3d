"""Moments ``E[phi(f_1)^q_1 ... phi(f_j)^q_j]`` of Bernoulli noise, three ways.

``phi(f) = sum_{k=1}^n f(k/n) eps_k / sqrt(n)`` with i.i.d. symmetric signs.

* :func:`moment_bruteforce` averages over all ``2**n`` sign vectors.
* :func:`moment_partition_formula` sums over partitions of the factor
  vertices into even blocks, weighting a block of size ``2p`` by the cumulant
  ``block_coefficient(2p)`` of a single sign.  This is the cumulant expansion
  of the moment generating function taken at ``lambda = 0``: every positive
  power of ``lambda`` vanishes there, so only the ``2p == |D|`` term of each
  block survives and odd blocks contribute nothing.
* :func:`moment_montecarlo` draws seeded sign vectors.

Random stream layout (fixed, machine independent): samples are drawn in
chunks of :data:`MC_CHUNK`.  Chunk ``j`` uses ``Philox(key=seed).jumped(j)``
and takes ``ceil(n/64)`` raw 64-bit words per sample; the low ``n`` bits of
the little-endian words, least significant first, give ``eps_k = 2*bit - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ._parallel import ordered_map
from .errors import CapacityError, GridMismatchError
from .funcgrid import GridFunction, weighted_grid_sum
from .numbers import block_coefficient
from .partitions import DEFAULT_PARTITION_CAP, VertexLabeling, enumerate_even_partitions

DEFAULT_ORACLE_CAP = 20
MC_CHUNK = 4096
_ENUM_CHUNK = 1 << 14

__all__ = [
    "DEFAULT_ORACLE_CAP",
    "MomentSpec",
    "McConfig",
    "phi_eval",
    "all_sign_vectors",
    "sign_chunks",
    "random_signs",
    "exact_expectation",
    "montecarlo_samples",
    "moment_bruteforce",
    "moment_partition_formula",
    "moment_montecarlo",
]


@dataclass(frozen=True)
class MomentSpec:
    """Ordered factors ``(f, power)`` sharing one grid size."""

    factors: tuple[tuple[GridFunction, int], ...]

    def __post_init__(self):
        factors = tuple((f, int(q)) for f, q in self.factors)
        if not factors:
            raise ValueError("a moment spec needs at least one factor")
        if any(q < 1 for _, q in factors):
            raise ValueError("powers must be positive")
        if len({f.n for f, _ in factors}) != 1:
            raise GridMismatchError("all factors must share the grid size n")
        if any(f.arity != 1 for f, _ in factors):
            raise GridMismatchError("factors must be univariate")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, *pairs: tuple[GridFunction, int]) -> "MomentSpec":
        return cls(tuple(pairs))

    @property
    def n(self) -> int:
        return self.factors[0][0].n

    @property
    def degree(self) -> int:
        return sum(q for _, q in self.factors)

    @property
    def labeling(self) -> VertexLabeling:
        return VertexLabeling.from_counts([q for _, q in self.factors])

    def vertex_functions(self) -> list[GridFunction]:
        return [f for f, q in self.factors for _ in range(q)]


@dataclass(frozen=True)
class McConfig:
    samples: int
    seed: int = 0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def phi_eval(f: GridFunction, eps) -> float | np.ndarray:
    """``sum_k f(k/n) eps_k / sqrt(n)``; ``eps`` may be a batch of shape ``(B, n)``."""
    eps = np.asarray(eps)
    if eps.shape[-1] != f.n:
        raise GridMismatchError(f"sign vector length {eps.shape[-1]} != n={f.n}")
    out = eps @ f.values / math.sqrt(f.n)
    return float(out) if out.ndim == 0 else out


def _signs_for_indices(idx: np.ndarray, n: int) -> np.ndarray:
    bits = (idx[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.float64)


def all_sign_vectors(n: int, cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    """All ``2**n`` sign vectors, row ``r`` encoding the bits of ``r``."""
    _check_oracle(n, cap)
    return _signs_for_indices(np.arange(2**n, dtype=np.int64), n)


def sign_chunks(n: int, cap: int = DEFAULT_ORACLE_CAP, chunk: int = _ENUM_CHUNK) -> list[tuple[int, int]]:
    """Index ranges covering all ``2**n`` sign vectors."""
    _check_oracle(n, cap)
    total = 2**n
    return [(a, min(a + chunk, total)) for a in range(0, total, chunk)]


def _check_oracle(n: int, cap: int) -> None:
    if n > cap:
        raise CapacityError(f"n={n} exceeds the brute-force oracle cap {cap}")


def exact_expectation(fn, n: int, cap: int = DEFAULT_ORACLE_CAP, workers: int | None = None) -> float:
    """Average of ``fn(signs)`` over every sign vector; ``fn`` maps ``(B, n) -> (B,)``."""

    def chunk_sum(bounds):
        a, b = bounds
        eps = _signs_for_indices(np.arange(a, b, dtype=np.int64), n)
        return float(np.sum(fn(eps)))

    parts = ordered_map(chunk_sum, sign_chunks(n, cap), workers)
    return math.fsum(parts) / 2**n


def _product_of_powers(spec: MomentSpec, eps: np.ndarray) -> np.ndarray:
    out = np.ones(eps.shape[0])
    for f, q in spec.factors:
        out = out * phi_eval(f, eps) ** q
    return out


def moment_bruteforce(spec: MomentSpec, cap: int = DEFAULT_ORACLE_CAP, workers: int | None = None) -> float:
    """Exact expectation over all ``2**n`` equiprobable sign vectors."""
    return exact_expectation(lambda eps: _product_of_powers(spec, eps), spec.n, cap, workers)


def moment_partition_formula(spec: MomentSpec, cap: int = DEFAULT_PARTITION_CAP) -> float:
    """Sum over even-block partitions of products of block weights."""
    K = spec.degree
    if K % 2:
        return 0.0
    if len(spec.factors) == 1:
        return _single_factor_formula(spec.factors[0][0], K, cap)
    funcs = spec.vertex_functions()
    labels = spec.labeling.multiplier_of
    block_value: dict[tuple[int, ...], float] = {}
    total = 0.0
    for part in enumerate_even_partitions(K, spec.labeling, False, cap):
        term = 1.0
        for block in part.blocks:
            key = tuple(sorted(labels[v - 1] for v in block))
            if key not in block_value:
                w = weighted_grid_sum([funcs[v - 1] for v in block])
                block_value[key] = float(block_coefficient(len(block))) * w
            term *= block_value[key]
        total += term
    return total


def _even_integer_partitions(K: int, largest: int) -> Iterator[list[int]]:
    if K == 0:
        yield []
        return
    for b in range(min(K, largest), 1, -1):
        if b % 2 == 0:
            for rest in _even_integer_partitions(K - b, b):
                yield [b] + rest


def _single_factor_formula(f: GridFunction, K: int, cap: int) -> float:
    # Same sum as the set-partition loop, grouped by block-size profile:
    # K! / (prod b! * prod multiplicity!) set partitions share each profile.
    if K > cap:
        raise CapacityError(f"K={K} exceeds the partition cap {cap}")
    weights = {b: block_weight([f] * b) for b in range(2, K + 1, 2)}
    total = 0.0
    for profile in _even_integer_partitions(K, K):
        count = math.factorial(K)
        for b in profile:
            count //= math.factorial(b)
        for b in set(profile):
            count //= math.factorial(profile.count(b))
        term = float(count)
        for b in profile:
            term *= weights[b]
        total += term
    return total


def random_signs(n: int, cfg: McConfig) -> Iterator[np.ndarray]:
    """Yield ``(rows, n)`` float sign matrices, ``cfg.samples`` rows in total."""
    words = -(-n // 64)
    base = np.random.Philox(key=cfg.seed)
    remaining = cfg.samples
    j = 0
    while remaining > 0:
        rows = min(MC_CHUNK, remaining)
        raw = base.jumped(j).random_raw(rows * words).astype("<u8")
        bits = np.unpackbits(raw.view(np.uint8).reshape(rows, words * 8), axis=1, bitorder="little")
        yield (2.0 * bits[:, :n] - 1.0)
        remaining -= rows
        j += 1


def montecarlo_samples(fn, n: int, cfg: McConfig, workers: int | None = None) -> np.ndarray:
    """Evaluate ``fn`` on every seeded sign vector, concatenated in stream order."""
    chunks = list(random_signs(n, cfg))
    return np.concatenate(ordered_map(fn, chunks, workers))


def moment_montecarlo(spec: MomentSpec, cfg: McConfig, workers: int | None = None) -> tuple[float, float]:
    """Sample mean and standard error of the factor product."""
    vals = montecarlo_samples(lambda eps: _product_of_powers(spec, eps), spec.n, cfg, workers)
    return _mean_and_se(vals)


def _mean_and_se(vals: np.ndarray) -> tuple[float, float]:
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("inf")
    return mean, se


def block_weight(functions: Sequence[GridFunction]) -> float:
    """Cumulant-weighted grid sum for one block of vertices."""
    return float(block_coefficient(len(functions))) * weighted_grid_sum(functions)
