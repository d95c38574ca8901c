"""Finite nonempty subsets of the integers and the hat/tilde reindexing.

``hat`` opens a gap at position 1 by pushing every positive element up by
one; ``tilde`` closes it again.  They are the set-level bookkeeping behind
the coordinate-dropping maps ``I_n`` in :mod:`markovqs.model`.
"""

from __future__ import annotations

from typing import Iterable, Iterator


class FinSet:
    """Immutable, sorted, nonempty set of integers."""

    __slots__ = ("_elements",)

    def __init__(self, elements: Iterable[int]):
        elems = tuple(sorted({int(e) for e in elements}))
        if not elems:
            raise ValueError("FinSet must be nonempty")
        self._elements = elems

    @property
    def elements(self) -> tuple[int, ...]:
        return self._elements

    def __iter__(self) -> Iterator[int]:
        return iter(self._elements)

    def __len__(self) -> int:
        return len(self._elements)

    def __contains__(self, item: object) -> bool:
        return item in self._elements

    def __eq__(self, other: object) -> bool:
        if isinstance(other, FinSet):
            return self._elements == other._elements
        return NotImplemented

    def __lt__(self, other: "FinSet") -> bool:
        return (len(self), self._elements) < (len(other), other._elements)

    def __hash__(self) -> int:
        return hash(self._elements)

    def __repr__(self) -> str:
        return "FinSet({%s})" % ", ".join(map(str, self._elements))

    @property
    def min(self) -> int:
        return self._elements[0]

    @property
    def max(self) -> int:
        return self._elements[-1]

    def within(self, lo: int, hi: int) -> bool:
        return lo <= self.min and self.max <= hi

    def __add__(self, n: int) -> "FinSet":
        return shift(self, n)

    def __sub__(self, n: int) -> "FinSet":
        return shift(self, -n)


def hat(A: FinSet) -> FinSet:
    """Keep elements <= 0, move each positive element up by one."""
    return FinSet(s if s <= 0 else s + 1 for s in A)


def tilde(B: FinSet) -> FinSet:
    """Inverse of :func:`hat`; only defined when ``1 not in B``."""
    if 1 in B:
        raise ValueError(f"tilde is undefined for sets containing 1: {B!r}")
    return FinSet(s if s <= 0 else s - 1 for s in B)


def shift(A: FinSet, n: int) -> FinSet:
    return FinSet(s + n for s in A)


def canonical_rep(A: FinSet) -> tuple[FinSet, int]:
    """Representative with minimum 0, and the offset that recovers ``A``."""
    offset = A.min
    return shift(A, -offset), offset


def are_equivalent(A: FinSet, B: FinSet) -> bool:
    return canonical_rep(A)[0] == canonical_rep(B)[0]


def subsets_of_window(lo: int, hi: int, include_empty: bool = False) -> Iterator[FinSet | None]:
    """Enumerate subsets of ``[lo, hi]`` in bitmask order (bit k <-> lo + k)."""
    width = hi - lo + 1
    start = 0 if include_empty else 1
    for mask in range(start, 1 << width):
        if mask == 0:
            yield None
        else:
            yield FinSet(lo + k for k in range(width) if mask >> k & 1)
