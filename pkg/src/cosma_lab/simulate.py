"""Round-based rank simulator with counted message channels.

Executes the parallel schedule on in-process ranks: blocked data
distribution, per-round broadcast of A/B panel chunks along binary trees,
local accumulation, and a binary-tree reduction of partial C blocks.  Every
inter-rank message is counted, and the numerical result flows through the
same block structure the counting describes.

Communication accounting mirrors the planning model: a rank's communication
is the panel words it receives plus the partial-result words it contributes
to the reduction.  Receipts inside the reduction tree are tracked separately
so that aggregate conservation (sum sent = sum received) can be asserted over
all messages without inflating the per-rank measure.

When the grid does not divide the matrix dimensions, matrices are padded to
the next multiple and the words of padding moved over the wire are tallied
in `padded_words`.
"""

from __future__ import annotations

import json
import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from io import StringIO

import numpy as np

from .errors import SimulationInvariantError
from .parsched import (
    LocalDomain,
    Machine,
    ProcessorGrid,
    check_memory,
    fit_ranks,
)

THREADS_ENV = "COSMA_LAB_THREADS"

DIM_I = "i"
DIM_J = "j"
DIM_K = "k"


# -- broadcast / reduction trees -----------------------------------------------


def pairing_rounds(size: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Tournament pairing of fiber positions: rounds of (src, dst) merges.

    Adjacent survivors pair up each round, so parent and child are nearest in
    the grid; ceil(log2(size)) rounds reduce everything into position 0.
    """
    rounds: list[tuple[tuple[int, int], ...]] = []
    active = list(range(size))
    while len(active) > 1:
        level: list[tuple[int, int]] = []
        nxt: list[int] = []
        for idx in range(0, len(active), 2):
            if idx + 1 < len(active):
                level.append((active[idx + 1], active[idx]))
            nxt.append(active[idx])
        rounds.append(tuple(level))
        active = nxt
    return tuple(rounds)


@dataclass(frozen=True)
class BroadcastTree:
    """Binary reduction/broadcast structure over the fibers of one grid axis.

    `rounds` holds position pairs within a fiber: in a reduction, src sends
    to dst; replayed in reverse with flipped roles, the same pairs broadcast
    from the root (position 0).  Every fiber member appears as a leaf of the
    pairing bracket.
    """

    dim: str
    fibers: tuple[tuple[int, ...], ...]
    rounds: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def fiber_size(self) -> int:
        return len(self.fibers[0]) if self.fibers else 0

    @property
    def depth(self) -> int:
        return len(self.rounds)

    @property
    def leaf_count(self) -> int:
        return self.fiber_size

    def root(self, fiber_index: int = 0) -> int:
        return self.fibers[fiber_index][0]


def build_broadcast_tree(grid: ProcessorGrid, dim: str) -> BroadcastTree:
    """Trees over all fibers of `grid` along axis 'i', 'j', or 'k'."""
    if dim not in (DIM_I, DIM_J, DIM_K):
        raise ValueError(f"dim must be one of 'i', 'j', 'k', got {dim!r}")
    pm, pn, pk = grid.pm, grid.pn, grid.pk

    def rank(gi: int, gj: int, gk: int) -> int:
        return gi * (pn * pk) + gj * pk + gk

    fibers: list[tuple[int, ...]] = []
    if dim == DIM_I:
        size = pm
        for gj in range(pn):
            for gk in range(pk):
                fibers.append(tuple(rank(i, gj, gk) for i in range(pm)))
    elif dim == DIM_J:
        size = pn
        for gi in range(pm):
            for gk in range(pk):
                fibers.append(tuple(rank(gi, j, gk) for j in range(pn)))
    else:
        size = pk
        for gi in range(pm):
            for gj in range(pn):
                fibers.append(tuple(rank(gi, gj, kk) for kk in range(pk)))
    return BroadcastTree(dim, tuple(fibers), pairing_rounds(size))


# -- blocked layout -------------------------------------------------------------


def _split_offsets(extent: int, parts: int) -> list[int]:
    """Balanced contiguous split: offsets of length parts+1."""
    base, extra = divmod(extent, parts)
    offs = [0]
    for idx in range(parts):
        offs.append(offs[-1] + base + (1 if idx < extra else 0))
    return offs


Block = tuple[tuple[int, int], tuple[int, int]]  # ((row0, row1), (col0, col1))


@dataclass(frozen=True)
class BlockedLayout:
    """Who owns which block of A, B, and C, in padded 0-based coordinates.

    Per active rank: `a_blocks[r]` is its slice of the A panel (the face
    block of its (i, k) grid position, column-split across the j fiber),
    `b_blocks[r]` the row-split slice of its B face, and `c_blocks[r]` the
    C face its accumulator covers.  The reduced C face lands on the k = 0
    rank of each fiber (`c_owners`).  Idle ranks own nothing.
    """

    grid: ProcessorGrid
    m: int
    n: int
    k: int
    bm: int
    bn: int
    bk: int
    a_blocks: tuple[Block | None, ...]
    b_blocks: tuple[Block | None, ...]
    c_blocks: tuple[Block | None, ...]
    c_owners: dict = field(hash=False)

    @property
    def padded_dims(self) -> tuple[int, int, int]:
        return (self.grid.pm * self.bm, self.grid.pn * self.bn, self.grid.pk * self.bk)

    def rank_of(self, gi: int, gj: int, gk: int) -> int:
        return gi * (self.grid.pn * self.grid.pk) + gj * self.grid.pk + gk

    def coords_of(self, rank: int) -> tuple[int, int, int]:
        pn, pk = self.grid.pn, self.grid.pk
        return (rank // (pn * pk), (rank // pk) % pn, rank % pk)


def decompose_data(m: int, n: int, k: int, grid: ProcessorGrid) -> BlockedLayout:
    """Blocked ownership map for the given grid, padding remainders."""
    pm, pn, pk = grid.pm, grid.pn, grid.pk
    bm = math.ceil(m / pm)
    bn = math.ceil(n / pn)
    bk = math.ceil(k / pk)
    a_offs = _split_offsets(bk, pn)  # A face columns split across the j fiber
    b_offs = _split_offsets(bk, pm)  # B face rows split across the i fiber

    total = grid.ranks_total
    a_blocks: list[Block | None] = [None] * total
    b_blocks: list[Block | None] = [None] * total
    c_blocks: list[Block | None] = [None] * total
    c_owners: dict[tuple[int, int], int] = {}
    for gi in range(pm):
        for gj in range(pn):
            for gk in range(pk):
                r = gi * (pn * pk) + gj * pk + gk
                a_blocks[r] = (
                    (gi * bm, (gi + 1) * bm),
                    (gk * bk + a_offs[gj], gk * bk + a_offs[gj + 1]),
                )
                b_blocks[r] = (
                    (gk * bk + b_offs[gi], gk * bk + b_offs[gi + 1]),
                    (gj * bn, (gj + 1) * bn),
                )
                c_blocks[r] = ((gi * bm, (gi + 1) * bm), (gj * bn, (gj + 1) * bn))
            c_owners[(gi, gj)] = gi * (pn * pk) + gj * pk  # gk = 0
    return BlockedLayout(
        grid, m, n, k, bm, bn, bk,
        tuple(a_blocks), tuple(b_blocks), tuple(c_blocks), c_owners,
    )


# -- communication statistics ----------------------------------------------------


@dataclass
class CommStats:
    """Per-rank message tallies for one simulated run."""

    p: int
    grid: tuple[int, int, int]
    rounds: list[int]
    words_sent: list[int]
    words_received: list[int]
    reduce_words: list[int]
    reduce_received: list[int]
    padded_words: int = 0

    @property
    def comm_per_rank(self) -> list[int]:
        """Panel words received plus reduction words contributed."""
        return [
            self.words_received[r] - self.reduce_received[r] + self.reduce_words[r]
            for r in range(self.p)
        ]

    @property
    def max_per_rank(self) -> int:
        return max(self.comm_per_rank)

    @property
    def mean_per_rank(self) -> float:
        return sum(self.comm_per_rank) / self.p

    @property
    def total_sent(self) -> int:
        return sum(self.words_sent)

    @property
    def total_received(self) -> int:
        return sum(self.words_received)

    def assert_conserved(self) -> None:
        if self.total_sent != self.total_received:
            raise SimulationInvariantError(
                f"sent {self.total_sent} words != received {self.total_received}"
            )

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "grid": list(self.grid),
            "padded_words": self.padded_words,
            "max_per_rank": self.max_per_rank,
            "mean_per_rank": self.mean_per_rank,
            "total_sent": self.total_sent,
            "total_received": self.total_received,
            "per_rank": [
                {
                    "rank": r,
                    "rounds": self.rounds[r],
                    "words_sent": self.words_sent[r],
                    "words_received": self.words_received[r],
                    "reduce_words": self.reduce_words[r],
                    "comm": self.comm_per_rank[r],
                }
                for r in range(self.p)
            ],
        }

    def to_csv(self) -> str:
        out = StringIO()
        out.write("rank,rounds,words_sent,words_received,reduce_words,comm\n")
        comm = self.comm_per_rank
        for r in range(self.p):
            out.write(
                f"{r},{self.rounds[r]},{self.words_sent[r]},"
                f"{self.words_received[r]},{self.reduce_words[r]},{comm[r]}\n"
            )
        return out.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


# -- simulation -------------------------------------------------------------------


def _padded_portion(block: Block, real_rows: int, real_cols: int) -> int:
    (r0, r1), (c0, c1) = block
    rows = r1 - r0
    cols = c1 - c0
    true_rows = max(0, min(r1, real_rows) - min(r0, real_rows))
    true_cols = max(0, min(c1, real_cols) - min(c0, real_cols))
    return rows * cols - true_rows * true_cols


def worker_count(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def run_cosma(
    A: np.ndarray,
    B: np.ndarray,
    machine: Machine,
    workers: int | None = None,
) -> tuple[np.ndarray, CommStats]:
    """Multiply A (m x k) by B (k x n) on simulated ranks; count every message.

    Returns the product and the per-rank communication statistics.  The run
    is deterministic: rank, fiber, and round orders are fixed, and the
    reduction combines blocks in bracket order regardless of `workers`.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise ValueError(f"dimension mismatch: A is {A.shape}, B is {B.shape}")
    if not (np.isfinite(A).all() and np.isfinite(B).all()):
        raise ValueError("matrix entries must be finite")
    m, k = A.shape
    n = B.shape[1]
    check_memory(m, n, k, machine.p, machine.S)

    grid, domain = fit_ranks(m, n, k, machine.p, machine.S, machine.delta)
    layout = decompose_data(m, n, k, grid)
    return _execute(A, B, machine, grid, domain, layout, worker_count(workers))


def _execute(
    A: np.ndarray,
    B: np.ndarray,
    machine: Machine,
    grid: ProcessorGrid,
    domain: LocalDomain,
    layout: BlockedLayout,
    workers: int,
) -> tuple[np.ndarray, CommStats]:
    m, k = A.shape
    n = B.shape[1]
    pm, pn, pk = grid.pm, grid.pn, grid.pk
    bm, bn, bk = layout.bm, layout.bn, layout.bk
    M, N, K = layout.padded_dims

    Ap = np.zeros((M, K))
    Ap[:m, :k] = A
    Bp = np.zeros((K, N))
    Bp[:k, :n] = B

    p = machine.p
    stats = CommStats(
        p=p,
        grid=grid.shape,
        rounds=[0] * p,
        words_sent=[0] * p,
        words_received=[0] * p,
        reduce_words=[0] * p,
        reduce_received=[0] * p,
    )

    rank_of = layout.rank_of
    partials = {
        rank_of(gi, gj, gk): np.zeros((bm, bn))
        for gi in range(pm)
        for gj in range(pn)
        for gk in range(pk)
    }

    s = domain.step_size
    t = domain.steps
    for r in partials:
        stats.rounds[r] = t

    a_offs = _split_offsets(bk, pn)
    b_offs = _split_offsets(bk, pm)
    j_pairs = pairing_rounds(pn)
    i_pairs = pairing_rounds(pm)
    k_pairs = pairing_rounds(pk)

    def message(src: int, dst: int, words: int, padded: int, reduction: bool) -> None:
        stats.words_sent[src] += words
        stats.words_received[dst] += words
        stats.padded_words += padded
        if reduction:
            stats.reduce_words[src] += words
            stats.reduce_received[dst] += words

    def broadcast_chunk(
        fiber: tuple[int, ...],
        pairs: tuple[tuple[tuple[int, int], ...], ...],
        owners: list[tuple[int, Block]],
        chunk: Block,
        real: tuple[int, int],
    ) -> None:
        # Owners feed the fiber root, which then broadcasts the full chunk
        # down the bracket; every non-root member receives it exactly once.
        root = fiber[0]
        for owner, block in owners:
            if owner != root:
                (r0, r1), (c0, c1) = block
                words = (r1 - r0) * (c1 - c0)
                message(owner, root, words, _padded_portion(block, *real), False)
        (r0, r1), (c0, c1) = chunk
        words = (r1 - r0) * (c1 - c0)
        pad = _padded_portion(chunk, *real)
        for level in reversed(pairs):
            for src_pos, dst_pos in level:
                message(fiber[dst_pos], fiber[src_pos], words, pad, False)

    def compute_round(args: tuple[int, int, int, int, int]) -> None:
        gi, gj, gk, c0, c1 = args
        r = rank_of(gi, gj, gk)
        rows = slice(gi * bm, (gi + 1) * bm)
        cols = slice(gj * bn, (gj + 1) * bn)
        mid = slice(gk * bk + c0, gk * bk + c1)
        partials[r] += Ap[rows, mid] @ Bp[mid, cols]

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for q in range(t):
            c0 = q * s
            c1 = min((q + 1) * s, bk)
            if c0 >= c1:
                break

            # A chunks: fiber along j shares the (gi, gk) panel.
            for gi in range(pm):
                for gk in range(pk):
                    fiber = tuple(rank_of(gi, j, gk) for j in range(pn))
                    if len(fiber) > 1:
                        rows = (gi * bm, (gi + 1) * bm)
                        chunk = (rows, (gk * bk + c0, gk * bk + c1))
                        owners = []
                        for gj in range(pn):
                            lo = max(c0, a_offs[gj])
                            hi = min(c1, a_offs[gj + 1])
                            if hi > lo:
                                owned = (rows, (gk * bk + lo, gk * bk + hi))
                                owners.append((fiber[gj], owned))
                        broadcast_chunk(fiber, j_pairs, owners, chunk, (m, k))

            # B chunks: fiber along i shares the (gk, gj) panel.
            for gj in range(pn):
                for gk in range(pk):
                    fiber = tuple(rank_of(i, gj, gk) for i in range(pm))
                    if len(fiber) > 1:
                        cols = (gj * bn, (gj + 1) * bn)
                        chunk = ((gk * bk + c0, gk * bk + c1), cols)
                        owners = []
                        for gi in range(pm):
                            lo = max(c0, b_offs[gi])
                            hi = min(c1, b_offs[gi + 1])
                            if hi > lo:
                                owned = ((gk * bk + lo, gk * bk + hi), cols)
                                owners.append((fiber[gi], owned))
                        broadcast_chunk(fiber, i_pairs, owners, chunk, (k, n))

            tasks = [
                (gi, gj, gk, c0, c1)
                for gi in range(pm)
                for gj in range(pn)
                for gk in range(pk)
            ]
            if pool is None:
                for task in tasks:
                    compute_round(task)
            else:
                list(pool.map(compute_round, tasks))
    finally:
        if pool is not None:
            pool.shutdown()

    # Reduce partial C blocks along the k fibers into the gk = 0 ranks.
    block_words = bm * bn
    for gi in range(pm):
        for gj in range(pn):
            fiber = tuple(rank_of(gi, gj, kk) for kk in range(pk))
            cblock = ((gi * bm, (gi + 1) * bm), (gj * bn, (gj + 1) * bn))
            pad = _padded_portion(cblock, m, n)
            for level in k_pairs:
                for src_pos, dst_pos in level:
                    src, dst = fiber[src_pos], fiber[dst_pos]
                    message(src, dst, block_words, pad, True)
                    partials[dst] += partials[src]

    Cp = np.zeros((M, N))
    for (gi, gj), owner in layout.c_owners.items():
        Cp[gi * bm:(gi + 1) * bm, gj * bn:(gj + 1) * bn] = partials[owner]
    C = Cp[:m, :n].copy()

    stats.assert_conserved()
    return C, stats


def measured_vs_predicted(stats: CommStats, pred: float) -> float:
    """Max-per-rank communication relative to the model prediction."""
    if pred <= 0:
        raise ValueError(f"prediction must be positive, got {pred}")
    return stats.max_per_rank / pred


def reference_multiply(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Plain triple-loop product, independent of the simulator's path."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    m, k = A.shape
    n = B.shape[1]
    C = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for r in range(k):
                acc += A[i, r] * B[r, j]
            C[i, j] = acc
    return C


def correctness_tolerance(A: np.ndarray, B: np.ndarray) -> float:
    k = A.shape[1]
    scale = float(np.max(np.abs(A)) * np.max(np.abs(B))) if A.size and B.size else 0.0
    return 1e-9 * k * scale


# -- matrix file formats -----------------------------------------------------------

_MAGIC = struct.Struct("<qq")


def save_matrix(path, arr: np.ndarray) -> None:
    """Binary format: two little-endian int64 dims, then row-major float64."""
    arr = np.ascontiguousarray(arr, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC.pack(*arr.shape))
        fh.write(arr.tobytes())


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        rows, cols = _MAGIC.unpack(fh.read(_MAGIC.size))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).copy()


def save_matrix_text(path, arr: np.ndarray) -> None:
    """Text format for small fixtures: 'rows cols' header, one row per line."""
    arr = np.asarray(arr, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write(f"{arr.shape[0]} {arr.shape[1]}\n")
        for row in arr:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_matrix_text(path) -> np.ndarray:
    with open(path) as fh:
        rows, cols = (int(x) for x in fh.readline().split())
        data = [[float(x) for x in fh.readline().split()] for _ in range(rows)]
    arr = np.array(data, dtype=np.float64)
    if arr.shape != (rows, cols):
        raise ValueError(f"{path}: expected {rows}x{cols}, found {arr.shape}")
    return arr
