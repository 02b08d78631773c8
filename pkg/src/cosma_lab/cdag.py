"""Matrix-multiplication computation graph and pebble-game set machinery.

The graph for C = A·B with dimensions (m, n, k) has one vertex per input
element and one vertex per partial sum of C:

  * A(i, r)    for i in 1..m, r in 1..k
  * B(r, j)    for r in 1..k, j in 1..n
  * C(i, j, r) for the r-th partial sum of output element (i, j)

The update C(i,j,r) = C(i,j,r-1) + A(i,r)·B(r,j) induces the edges: every
C(i,j,r) depends on A(i,r) and B(r,j), and on C(i,j,r-1) when r > 1.  The
first layer (r = 1) starts the accumulator from zero and has no C parent.
A and B vertices are the graph inputs; C(i,j,k) are the outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, NamedTuple

from .errors import SizeCapError

KIND_A = "A"
KIND_B = "B"
KIND_C = "C"

DEFAULT_VERTEX_CAP = 1_000_000


class Vertex(NamedTuple):
    """A graph vertex: kind 'A'/'B'/'C' plus 1-based coordinates."""

    kind: str
    coords: tuple[int, ...]

    def __repr__(self) -> str:
        return f"{self.kind}{self.coords}"


def a_vertex(i: int, r: int) -> Vertex:
    return Vertex(KIND_A, (i, r))


def b_vertex(r: int, j: int) -> Vertex:
    return Vertex(KIND_B, (r, j))


def c_vertex(i: int, j: int, r: int) -> Vertex:
    return Vertex(KIND_C, (i, j, r))


class CDAG:
    """Implicit multiply graph: adjacency is computed from coordinates.

    Parent/child queries are O(1) in the graph size (children of an A or B
    vertex are materialized on demand, with length n or m respectively).
    """

    def __init__(self, m: int, n: int, k: int, cap: int = DEFAULT_VERTEX_CAP):
        if min(m, n, k) < 1:
            raise ValueError(f"dimensions must be positive, got {(m, n, k)}")
        total = m * k + k * n + m * n * k
        if total > cap:
            raise SizeCapError(
                f"instance ({m},{n},{k}) has {total} vertices, exceeding the cap of {cap}"
            )
        self.m = m
        self.n = n
        self.k = k

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.m, self.n, self.k)

    @property
    def num_vertices(self) -> int:
        return self.m * self.k + self.k * self.n + self.m * self.n * self.k

    def __repr__(self) -> str:
        return f"CDAG(m={self.m}, n={self.n}, k={self.k})"

    # -- membership ------------------------------------------------------

    def contains(self, v: Vertex) -> bool:
        if v.kind == KIND_A and len(v.coords) == 2:
            i, r = v.coords
            return 1 <= i <= self.m and 1 <= r <= self.k
        if v.kind == KIND_B and len(v.coords) == 2:
            r, j = v.coords
            return 1 <= r <= self.k and 1 <= j <= self.n
        if v.kind == KIND_C and len(v.coords) == 3:
            i, j, r = v.coords
            return 1 <= i <= self.m and 1 <= j <= self.n and 1 <= r <= self.k
        return False

    def check_vertex(self, v: Vertex) -> None:
        if not self.contains(v):
            raise ValueError(f"{v} is not a vertex of {self}")

    def is_input(self, v: Vertex) -> bool:
        return v.kind in (KIND_A, KIND_B) and self.contains(v)

    def is_output(self, v: Vertex) -> bool:
        return v.kind == KIND_C and self.contains(v) and v.coords[2] == self.k

    # -- adjacency -------------------------------------------------------

    def parents(self, v: Vertex) -> tuple[Vertex, ...]:
        self.check_vertex(v)
        if v.kind != KIND_C:
            return ()
        i, j, r = v.coords
        if r == 1:
            return (a_vertex(i, 1), b_vertex(1, j))
        return (a_vertex(i, r), b_vertex(r, j), c_vertex(i, j, r - 1))

    def chain_parent(self, v: Vertex) -> Vertex | None:
        """The C-predecessor of a partial sum, or None on the first layer."""
        if v.kind == KIND_C and v.coords[2] > 1:
            i, j, r = v.coords
            return c_vertex(i, j, r - 1)
        return None

    def children(self, v: Vertex) -> tuple[Vertex, ...]:
        self.check_vertex(v)
        if v.kind == KIND_A:
            i, r = v.coords
            return tuple(c_vertex(i, j, r) for j in range(1, self.n + 1))
        if v.kind == KIND_B:
            r, j = v.coords
            return tuple(c_vertex(i, j, r) for i in range(1, self.m + 1))
        i, j, r = v.coords
        if r < self.k:
            return (c_vertex(i, j, r + 1),)
        return ()

    # -- iteration -------------------------------------------------------

    def a_vertices(self) -> Iterator[Vertex]:
        for i in range(1, self.m + 1):
            for r in range(1, self.k + 1):
                yield a_vertex(i, r)

    def b_vertices(self) -> Iterator[Vertex]:
        for r in range(1, self.k + 1):
            for j in range(1, self.n + 1):
                yield b_vertex(r, j)

    def c_vertices(self) -> Iterator[Vertex]:
        for i in range(1, self.m + 1):
            for j in range(1, self.n + 1):
                for r in range(1, self.k + 1):
                    yield c_vertex(i, j, r)

    def vertices(self) -> Iterator[Vertex]:
        yield from self.a_vertices()
        yield from self.b_vertices()
        yield from self.c_vertices()

    def inputs(self) -> Iterator[Vertex]:
        yield from self.a_vertices()
        yield from self.b_vertices()

    def outputs(self) -> Iterator[Vertex]:
        for i in range(1, self.m + 1):
            for j in range(1, self.n + 1):
                yield c_vertex(i, j, self.k)


def build_mmm_cdag(m: int, n: int, k: int, cap: int = DEFAULT_VERTEX_CAP) -> CDAG:
    """Build the multiply graph for given dimensions, guarded by a vertex cap."""
    return CDAG(m, n, k, cap=cap)


# -- projections ----------------------------------------------------------


def phi_a(vs: Iterable[Vertex]) -> set[tuple[int, int]]:
    """Project C-vertices onto A coordinates (i, r)."""
    return {(v.coords[0], v.coords[2]) for v in vs if v.kind == KIND_C}


def phi_b(vs: Iterable[Vertex]) -> set[tuple[int, int]]:
    """Project C-vertices onto B coordinates (r, j)."""
    return {(v.coords[2], v.coords[1]) for v in vs if v.kind == KIND_C}


def phi_c(vs: Iterable[Vertex]) -> set[tuple[int, int]]:
    """Project C-vertices onto output coordinates (i, j)."""
    return {(v.coords[0], v.coords[1]) for v in vs if v.kind == KIND_C}


# -- dominator / minimum sets ----------------------------------------------


def dominator_set(g: CDAG, vs: Iterable[Vertex]) -> frozenset[Vertex]:
    """Minimal set of vertices intercepting every input-to-`vs` path.

    For a set of partial-sum vertices this is the union of its A-projection,
    its B-projection, and the C-predecessors that lie outside the set.
    """
    vset = frozenset(vs)
    for v in vset:
        if v.kind != KIND_C:
            raise ValueError(f"dominator_set expects C-vertices, got {v}")
        g.check_vertex(v)
    dom: set[Vertex] = set()
    for (i, r) in phi_a(vset):
        dom.add(a_vertex(i, r))
    for (r, j) in phi_b(vset):
        dom.add(b_vertex(r, j))
    for v in vset:
        prev = g.chain_parent(v)
        if prev is not None and prev not in vset:
            dom.add(prev)
    return frozenset(dom)


def minimum_set(g: CDAG, vs: Iterable[Vertex]) -> frozenset[Vertex]:
    """All vertices of `vs` with no child inside `vs`."""
    vset = frozenset(vs)
    for v in vset:
        g.check_vertex(v)
    return frozenset(
        v for v in vset if not any(c in vset for c in g.children(v))
    )


# -- X-partitions -----------------------------------------------------------


@dataclass(frozen=True)
class XPartition:
    """An ordered cover of the C-vertices by disjoint subcomputations."""

    subsets: tuple[frozenset[Vertex], ...]
    bound: int


def x_partition_violation(g: CDAG, part: XPartition) -> str | None:
    """Return a description of the first violated condition, or None if valid.

    Conditions checked, in order: subsets are pairwise disjoint; their union
    covers every C-vertex; the cross-subset dependency graph is acyclic; and
    every subset has dominator and minimum sets of size at most the bound.
    """
    owner: dict[Vertex, int] = {}
    for idx, sub in enumerate(part.subsets):
        for v in sub:
            if v.kind != KIND_C:
                return f"subset {idx} contains non-C vertex {v}"
            g.check_vertex(v)
            if v in owner:
                return f"subsets {owner[v]} and {idx} both contain {v}"
            owner[v] = idx

    total_c = g.m * g.n * g.k
    if len(owner) != total_c:
        return f"subsets cover {len(owner)} of {total_c} C-vertices"

    # Cross-subset dependencies arise only along accumulator chains.
    succs: dict[int, set[int]] = {i: set() for i in range(len(part.subsets))}
    indeg = {i: 0 for i in range(len(part.subsets))}
    for v, idx in owner.items():
        prev = g.chain_parent(v)
        if prev is not None and owner.get(prev, idx) != idx:
            src = owner[prev]
            if idx not in succs[src]:
                succs[src].add(idx)
                indeg[idx] += 1
    ready = [i for i, d in indeg.items() if d == 0]
    seen = 0
    while ready:
        i = ready.pop()
        seen += 1
        for j in succs[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)
    if seen != len(part.subsets):
        return "cyclic dependency between subsets"

    for idx, sub in enumerate(part.subsets):
        dom = len(dominator_set(g, sub))
        if dom > part.bound:
            return f"subset {idx} has |Dom| = {dom} > {part.bound}"
        mins = len(minimum_set(g, sub))
        if mins > part.bound:
            return f"subset {idx} has |Min| = {mins} > {part.bound}"
    return None


def validate_x_partition(g: CDAG, part: XPartition) -> bool:
    return x_partition_violation(g, part) is None


# -- intensity and bounds ----------------------------------------------------


def computational_intensity(vol: int, x: int, reuse: int, min_io: int) -> Fraction:
    """Computations per word of I/O: vol / (x - reuse + min_io)."""
    denom = x - reuse + min_io
    if denom <= 0:
        raise ValueError(
            f"intensity denominator must be positive, got {x} - {reuse} + {min_io} = {denom}"
        )
    return Fraction(vol, denom)


def intensity_io_bound(total_volume: int, intensity: Fraction) -> int:
    """I/O lower bound implied by a computational intensity: ceil(V / rho)."""
    if intensity <= 0:
        raise ValueError("intensity must be positive")
    return math.ceil(Fraction(total_volume) / intensity)


def sequential_lower_bound(m: int, n: int, k: int, S: int) -> float:
    """Minimum I/O of any complete pebbling: 2mnk/sqrt(S) + mn."""
    if S < 3:
        raise ValueError(f"fast memory must hold at least 3 words, got S={S}")
    return 2.0 * m * n * k / math.sqrt(S) + m * n
