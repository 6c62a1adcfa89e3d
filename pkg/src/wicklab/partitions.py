"""Even-block set partitions, perfect matchings and per-block traversals.

Vertices are numbered ``1..K``.  A :class:`VertexLabeling` records which
factor (multiplier) each vertex came from; factors own contiguous runs of
vertices in order.

Partitions are generated by always anchoring the next block at the smallest
unassigned vertex and choosing its companions from a bitmask of the
remaining vertices.  Companion sets are tried by increasing size, then in
lexicographic order, which fixes a reproducible canonical stream without
duplicates.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations
from typing import Iterator, Sequence

from .errors import CapacityError

DEFAULT_PARTITION_CAP = 16

__all__ = [
    "DEFAULT_PARTITION_CAP",
    "VertexLabeling",
    "EvenPartition",
    "Traversal",
    "Diagram",
    "count_ascents",
    "enumerate_even_partitions",
    "enumerate_pair_partitions",
    "enumerate_set_partitions",
    "enumerate_traversals",
    "enumerate_diagrams",
]


@dataclass(frozen=True)
class VertexLabeling:
    """Maps vertex ``v`` (1-based) to multiplier ``multiplier_of[v-1]`` (1-based)."""

    multiplier_of: tuple[int, ...]

    def __post_init__(self):
        labels = self.multiplier_of
        if not labels:
            raise ValueError("labeling must have at least one vertex")
        if labels[0] != 1 or any(b - a not in (0, 1) for a, b in zip(labels, labels[1:])):
            raise ValueError("multiplier labels must be contiguous runs 1, 2, ..., N")

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "VertexLabeling":
        if any(c < 1 for c in counts):
            raise ValueError("every multiplier needs at least one vertex")
        return cls(tuple(i + 1 for i, c in enumerate(counts) for _ in range(c)))

    @classmethod
    def single(cls, K: int) -> "VertexLabeling":
        return cls((1,) * K)

    @property
    def K(self) -> int:
        return len(self.multiplier_of)

    @property
    def counts(self) -> tuple[int, ...]:
        out = [0] * self.multiplier_of[-1]
        for m in self.multiplier_of:
            out[m - 1] += 1
        return tuple(out)

    def is_monochromatic(self, block: Sequence[int]) -> bool:
        first = self.multiplier_of[block[0] - 1]
        return all(self.multiplier_of[v - 1] == first for v in block)


@dataclass(frozen=True)
class EvenPartition:
    blocks: tuple[tuple[int, ...], ...]

    def __iter__(self):
        return iter(self.blocks)

    def __len__(self):
        return len(self.blocks)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def as_sets(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(b) for b in self.blocks)


@dataclass(frozen=True)
class Traversal:
    block: tuple[int, ...]
    order: tuple[int, ...]
    ascents: int

    @property
    def sign(self) -> int:
        return -1 if (self.ascents - 1) % 2 else 1


@dataclass(frozen=True)
class Diagram:
    partition: EvenPartition
    traversals: tuple[Traversal, ...]

    @property
    def sign(self) -> int:
        s = 1
        for t in self.traversals:
            s *= t.sign
        return s


def count_ascents(order: Sequence[int]) -> int:
    """Neighbouring pairs with ``a[i] <= a[i+1]`` across the whole sequence."""
    return sum(1 for a, b in zip(order, order[1:]) if a <= b)


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length())
        mask ^= low
    return out


def _check_cap(K: int, cap: int) -> None:
    if K > cap:
        raise CapacityError(f"K={K} exceeds the partition cap {cap}")


def _partitions(
    K: int,
    sizes_ok,
    labeling: VertexLabeling | None,
    exclude_same_multiplier: bool,
) -> Iterator[EvenPartition]:
    full = (1 << K) - 1

    def rec(remaining: int, acc: list[tuple[int, ...]]):
        if not remaining:
            yield EvenPartition(tuple(acc))
            return
        anchor = remaining & -remaining
        rest = _bits(remaining ^ anchor)
        first = anchor.bit_length()
        for extra in range(len(rest) + 1):
            if not sizes_ok(extra + 1):
                continue
            for combo in combinations(rest, extra):
                block = (first,) + combo
                if exclude_same_multiplier and labeling.is_monochromatic(block):
                    continue
                mask = anchor
                for v in combo:
                    mask |= 1 << (v - 1)
                acc.append(block)
                yield from rec(remaining ^ mask, acc)
                acc.pop()

    yield from rec(full, [])


def _labeling_for(K: int, labeling: VertexLabeling | None) -> VertexLabeling:
    if labeling is None:
        return VertexLabeling.single(K)
    if labeling.K != K:
        raise ValueError(f"labeling has {labeling.K} vertices, expected {K}")
    return labeling


def enumerate_even_partitions(
    K: int,
    labeling: VertexLabeling | None = None,
    exclude_same_multiplier: bool = False,
    cap: int = DEFAULT_PARTITION_CAP,
) -> Iterator[EvenPartition]:
    """Every partition of ``{1..K}`` into blocks of even size, once each.

    With ``exclude_same_multiplier`` partitions having a block whose vertices
    all belong to one multiplier are skipped.  Odd ``K`` yields nothing.
    """
    if K < 1:
        raise ValueError("K must be positive")
    _check_cap(K, cap)
    if K % 2:
        return iter(())
    labeling = _labeling_for(K, labeling)
    return _partitions(K, lambda s: s % 2 == 0, labeling, exclude_same_multiplier)


def enumerate_pair_partitions(
    K: int,
    labeling: VertexLabeling | None = None,
    exclude_same_multiplier: bool = False,
    cap: int = DEFAULT_PARTITION_CAP,
) -> Iterator[EvenPartition]:
    """Perfect matchings of ``{1..K}``; ``(K-1)!!`` before exclusion."""
    if K < 1:
        raise ValueError("K must be positive")
    _check_cap(K, cap)
    if K % 2:
        return iter(())
    labeling = _labeling_for(K, labeling)
    return _partitions(K, lambda s: s == 2, labeling, exclude_same_multiplier)


def enumerate_set_partitions(K: int, cap: int = DEFAULT_PARTITION_CAP) -> Iterator[EvenPartition]:
    """All set partitions of ``{1..K}`` (any block sizes), canonical order.

    The result type is reused for convenience; blocks need not be even here.
    """
    _check_cap(K, cap)
    if K == 0:
        return iter([EvenPartition(())])
    return _partitions(K, lambda s: True, None, False)


def enumerate_traversals(block: Sequence[int]) -> Iterator[Traversal]:
    """All orders of ``block`` that start at its minimum, tails in lexicographic order."""
    items = tuple(sorted(block))
    if len(items) < 2 or len(items) % 2:
        raise ValueError(f"traversals need an even block of size >= 2, got {block}")
    head, tail = items[0], items[1:]
    for perm in permutations(tail):
        order = (head,) + perm
        yield Traversal(items, order, count_ascents(order))


def enumerate_diagrams(partition: EvenPartition) -> Iterator[Diagram]:
    """Every combination of one traversal per block of ``partition``."""

    def rec(i: int, acc: list[Traversal]):
        if i == len(partition.blocks):
            yield Diagram(partition, tuple(acc))
            return
        for t in enumerate_traversals(partition.blocks[i]):
            acc.append(t)
            yield from rec(i + 1, acc)
            acc.pop()

    yield from rec(0, [])
