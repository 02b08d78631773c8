"""Near-I/O-optimal sequential tiling: tile choice, schedule, exact trace.

The schedule keeps an a x b block of C resident, walks the shared dimension
once per block, loading the a-element A fragment and streaming the b
B-elements of each step, and stores each C element exactly once:

    for i1 in tiles of m (size a):
      for j1 in tiles of n (size b):
        for r in 1..k:
          for i2 in tile rows:            # A(i2, r) loaded once per step
            for j2 in tile cols:          # B(r, j2) loaded once per step
              C(i2,j2) += A(i2,r) * B(r,j2)

Boundary tiles are clipped, never padded, so I/O counts stay exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .cdag import Vertex, a_vertex, b_vertex, c_vertex
from .pebbling import Move, compute, load, delete, store


@dataclass(frozen=True)
class SeqTile:
    """Resident C-block shape: a rows by b columns, ab + a + 1 <= S.

    `degenerate` marks the 1x1 fallback used when S < 4 and the closed
    forms do not apply.
    """

    a: int
    b: int
    intensity: Fraction
    degenerate: bool = False


def _tile_rank(a: int, b: int) -> tuple[Fraction, int, int]:
    # Maximize multiplications per loaded word; prefer small a, then small b,
    # so ties resolve deterministically.
    return (Fraction(a * b, a + b), -a, -b)


def closed_form_tile(S: int) -> tuple[int, int]:
    """Floored real-relaxation optimizer of ab/(a+b) s.t. ab + a + 1 <= S."""
    root = math.sqrt((S - 1) ** 3)
    a = int((root - S + 1) / (S - 2))
    b = int(-(2 * S + root - S * S - 1) / (root - S + 1))
    return a, b


def optimal_tile(S: int) -> SeqTile:
    """Best integer tile for a fast memory of S words.

    Maximizes ab/(a+b) subject to ab + a + 1 <= S exactly.  The objective is
    symmetric in (a, b) while the constraint is looser for the smaller first
    component, so some argmax has a <= b; for fixed a the best b is the
    constraint-binding one.  Scanning a up to sqrt(S-1) is therefore exact
    (the floored closed forms can be off by more than one, e.g. S = 331).
    """
    if S < 4:
        return SeqTile(1, 1, Fraction(1, 2), degenerate=True)

    best: tuple[Fraction, int, int] | None = None
    best_ab = (1, 1)
    for a in range(1, math.isqrt(S - 1) + 1):
        b = (S - 1 - a) // a
        if b < 1:
            break
        rank = _tile_rank(a, b)
        if best is None or rank > best:
            best = rank
            best_ab = (a, b)
    a, b = best_ab
    return SeqTile(a, b, Fraction(a * b, a + b))


@dataclass(frozen=True)
class SeqSchedule:
    """A tiled walk over the (m, n, k) iteration space."""

    m: int
    n: int
    k: int
    tile: SeqTile

    def tiles(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        """Clipped (row-range, col-range) per tile, 1-based inclusive."""
        a, b = self.tile.a, self.tile.b
        out = []
        for i1 in range(0, self.m, a):
            for j1 in range(0, self.n, b):
                rows = (i1 + 1, min(i1 + a, self.m))
                cols = (j1 + 1, min(j1 + b, self.n))
                out.append((rows, cols))
        return out

    def multiplications(self) -> Iterator[tuple[int, int, int]]:
        """Every (i, j, r) update exactly once, in schedule order."""
        for (r0, r1), (c0, c1) in self.tiles():
            for r in range(1, self.k + 1):
                for i in range(r0, r1 + 1):
                    for j in range(c0, c1 + 1):
                        yield (i, j, r)

    def count_multiplications(self) -> int:
        return self.m * self.n * self.k


def emit_schedule(m: int, n: int, k: int, S: int) -> SeqSchedule:
    return SeqSchedule(m, n, k, optimal_tile(S))


def closed_form_io(s: SeqSchedule) -> tuple[int, int]:
    """Loads/stores implied by the tile arithmetic, without simulating."""
    loads = sum(
        s.k * ((r1 - r0 + 1) + (c1 - c0 + 1)) for (r0, r1), (c0, c1) in s.tiles()
    )
    return loads, s.m * s.n


def trace_io(s: SeqSchedule, S: int) -> tuple[int, int]:
    """Exact fast-memory trace of the schedule.

    Counts one load per A-fragment element and B element per step and one
    store per C element, asserting the resident working set (C block, A
    fragment, one streamed B element) never exceeds S words.
    """
    loads = 0
    stores = 0
    for (r0, r1), (c0, c1) in s.tiles():
        ta = r1 - r0 + 1
        tb = c1 - c0 + 1
        peak = ta * tb + ta + 1
        assert peak <= S, f"working set {peak} exceeds capacity {S}"
        for _r in range(s.k):
            loads += ta  # A fragment for this step
            loads += tb  # B elements streamed one at a time
        stores += ta * tb
    return loads, stores


def schedule_to_pebbling(s: SeqSchedule) -> list[Move]:
    """Translate the schedule into pebble-game moves.

    Within a step the B elements are streamed: each is loaded, used for the
    whole A fragment, and becomes dead.  Dead pebbles (finished fragments,
    stored outputs) are deleted lazily, only when a later load needs room, so
    small instances produce minimal move lists.
    """
    capacity = s.tile.a * s.tile.b + s.tile.a + 1
    moves: list[Move] = []
    resident: set[Vertex] = set()
    dead: list[Vertex] = []

    def make_room(needed: int) -> None:
        while len(resident) + needed > capacity and dead:
            v = dead.pop()
            resident.discard(v)
            moves.append(delete(v))

    def add(v: Vertex) -> None:
        # A and B fragments recur across tiles: a reloaded vertex may still
        # sit in the dead pool from its previous use and must come back alive.
        if v in dead:
            dead.remove(v)
        if v not in resident:
            make_room(1)
        moves.append(load(v))
        resident.add(v)

    for (r0, r1), (c0, c1) in s.tiles():
        for r in range(1, s.k + 1):
            for i in range(r0, r1 + 1):
                add(a_vertex(i, r))
            for j in range(c0, c1 + 1):
                bv = b_vertex(r, j)
                add(bv)
                for i in range(r0, r1 + 1):
                    cv = c_vertex(i, j, r)
                    if r == 1:
                        make_room(1)  # first layer opens a new accumulator
                    moves.append(compute(cv))
                    # Later layers reuse their accumulator slot in place.
                    if r > 1:
                        resident.discard(c_vertex(i, j, r - 1))
                    resident.add(cv)
                dead.append(bv)
            for i in range(r0, r1 + 1):
                dead.append(a_vertex(i, r))
        for i in range(r0, r1 + 1):
            for j in range(c0, c1 + 1):
                cv = c_vertex(i, j, s.k)
                moves.append(store(cv))
                dead.append(cv)
    return moves


def schedule_bricks(s: SeqSchedule) -> list[frozenset[Vertex]]:
    """Per-(tile, step) vertex sets, in execution order.

    Together they form a partition of the C-vertices whose dominator sets
    have at most a*b + a + b elements.
    """
    bricks = []
    for (r0, r1), (c0, c1) in s.tiles():
        for r in range(1, s.k + 1):
            bricks.append(
                frozenset(
                    c_vertex(i, j, r)
                    for i in range(r0, r1 + 1)
                    for j in range(c0, c1 + 1)
                )
            )
    return bricks


def schedule_tiles_csv(s: SeqSchedule) -> str:
    """Tile table: index plus 1-based inclusive row/column ranges."""
    lines = ["tile,i_first,i_last,j_first,j_last"]
    for idx, ((r0, r1), (c0, c1)) in enumerate(s.tiles()):
        lines.append(f"{idx},{r0},{r1},{c0},{c1}")
    return "\n".join(lines) + "\n"
