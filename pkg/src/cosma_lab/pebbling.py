"""Red-blue pebble game over the multiply graph.

Game rules, as validated here:

  * Load    - place a red pebble on a vertex holding a blue pebble.
  * Store   - place a blue pebble on a vertex holding a red pebble.
  * Compute - place a red pebble on a vertex whose parents are all red.
  * Delete  - remove a pebble (red by default) from a vertex.

At most S red pebbles exist at any time.  The initial configuration has blue
pebbles exactly on the inputs; a complete calculation ends with blue pebbles
on every output.  Only loads and stores count toward the I/O tally.

One semantic choice matters: a partial sum overwrites its predecessor in
place.  Computing C(i,j,r) consumes the red pebble of C(i,j,r-1) in the same
step (that vertex has no other child and its value is dead), so an
accumulator chain occupies a single red slot.  This mirrors the resident-set
accounting a*b + a + 1 <= S of the tiled schedule and makes S = 3 suffice for
any instance.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .cdag import CDAG, KIND_A, KIND_B, KIND_C, Vertex
from .errors import (
    IllegalMoveError,
    IncompleteCalculationError,
    InfeasibleError,
    SizeCapError,
)

RED = "red"
BLUE = "blue"


class MoveOp(str, Enum):
    LOAD = "L"
    STORE = "S"
    COMPUTE = "C"
    DELETE = "D"


@dataclass(frozen=True)
class Move:
    op: MoveOp
    target: Vertex
    color: str = RED  # consulted only for DELETE

    def __repr__(self) -> str:
        extra = f" {self.color}" if self.op is MoveOp.DELETE and self.color != RED else ""
        return f"{self.op.value} {self.target}{extra}"


def load(v: Vertex) -> Move:
    return Move(MoveOp.LOAD, v)


def store(v: Vertex) -> Move:
    return Move(MoveOp.STORE, v)


def compute(v: Vertex) -> Move:
    return Move(MoveOp.COMPUTE, v)


def delete(v: Vertex, color: str = RED) -> Move:
    return Move(MoveOp.DELETE, v, color)


def validate_pebbling(g: CDAG, S: int, moves: Sequence[Move]) -> tuple[int, int]:
    """Replay a move sequence and return its (loads, stores) tally.

    Raises IllegalMoveError on the first rule violation (with the move index
    and the violated rule) and IncompleteCalculationError if some output is
    left without a blue pebble at the end.
    """
    if S < 1:
        raise ValueError(f"red capacity must be positive, got {S}")
    red: set[Vertex] = set()
    blue: set[Vertex] = set(g.inputs())
    loads = 0
    stores = 0

    for idx, mv in enumerate(moves):
        v = mv.target
        if not g.contains(v):
            raise IllegalMoveError(idx, f"{v} is not a vertex of the graph")
        if mv.op is MoveOp.LOAD:
            if v not in blue:
                raise IllegalMoveError(idx, f"load of {v} without a blue pebble")
            red.add(v)
            if len(red) > S:
                raise IllegalMoveError(
                    idx, f"load of {v} needs {len(red)} red pebbles, capacity {S}"
                )
            loads += 1
        elif mv.op is MoveOp.STORE:
            if v not in red:
                raise IllegalMoveError(idx, f"store of {v} without a red pebble")
            blue.add(v)
            stores += 1
        elif mv.op is MoveOp.COMPUTE:
            missing = [u for u in g.parents(v) if u not in red]
            if missing:
                raise IllegalMoveError(
                    idx, f"compute of {v} with unpebbled parents {missing}"
                )
            if v.kind != KIND_C:
                raise IllegalMoveError(idx, f"compute of input vertex {v}")
            prev = g.chain_parent(v)
            if prev is not None:
                red.discard(prev)  # accumulator slot is reused in place
            red.add(v)
            if len(red) > S:
                raise IllegalMoveError(
                    idx, f"compute of {v} needs {len(red)} red pebbles, capacity {S}"
                )
        elif mv.op is MoveOp.DELETE:
            pool = red if mv.color == RED else blue
            if v not in pool:
                raise IllegalMoveError(idx, f"delete of {v}: no {mv.color} pebble")
            pool.discard(v)
        else:  # pragma: no cover - enum is closed
            raise IllegalMoveError(idx, f"unknown op {mv.op}")

    missing_out = [v for v in g.outputs() if v not in blue]
    if missing_out:
        raise IncompleteCalculationError(
            f"{len(missing_out)} outputs never blue-pebbled, e.g. {missing_out[:3]}"
        )
    return loads, stores


# -- text serialization -------------------------------------------------------

# One move per line: "<L|S|C|D> <kind> <coords...>", e.g. "C C 1 2 3" computes
# the third partial sum of output (1, 2).  Deletes of blue pebbles carry a
# trailing "blue" token.


def moves_to_text(moves: Iterable[Move]) -> str:
    lines = []
    for mv in moves:
        parts = [mv.op.value, mv.target.kind, *map(str, mv.target.coords)]
        if mv.op is MoveOp.DELETE and mv.color == BLUE:
            parts.append(BLUE)
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


def moves_from_text(text: str) -> list[Move]:
    ops = {op.value: op for op in MoveOp}
    moves = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        color = RED
        if parts[-1] in (RED, BLUE):
            color = parts[-1]
            parts = parts[:-1]
        if len(parts) < 4 or parts[0] not in ops or parts[1] not in (KIND_A, KIND_B, KIND_C):
            raise ValueError(f"line {lineno}: cannot parse move {raw!r}")
        coords = tuple(int(x) for x in parts[2:])
        moves.append(Move(ops[parts[0]], Vertex(parts[1], coords), color))
    return moves


# -- exact oracle --------------------------------------------------------------

DEFAULT_ORACLE_CAP = 30


def brute_force_optimal_io(g: CDAG, S: int, cap: int = DEFAULT_ORACLE_CAP) -> int:
    """Exact minimum I/O of any complete calculation, for tiny instances.

    Iterative deepening on the I/O budget over the state space
    (red pebbles, stored vertices), with memoization and dominance pruning.
    Deterministic; intended for graphs of at most `cap` vertices.
    """
    if g.num_vertices > cap:
        raise SizeCapError(
            f"{g} has {g.num_vertices} vertices, oracle cap is {cap}"
        )
    if S < 3:
        raise InfeasibleError(
            f"no complete calculation exists with S={S}: computing any "
            "multiplication keeps 3 values resident"
        )

    verts = list(g.vertices())
    index = {v: i for i, v in enumerate(verts)}
    nbits = len(verts)
    S = min(S, nbits)

    parent_mask = [0] * nbits
    chain = [-1] * nbits
    for v, i in index.items():
        for u in g.parents(v):
            parent_mask[i] |= 1 << index[u]
        prev = g.chain_parent(v)
        if prev is not None:
            chain[i] = index[prev]

    c_indices = [index[v] for v in g.c_vertices()]
    outputs_mask = 0
    for v in g.outputs():
        outputs_mask |= 1 << index[v]
    loadable_base = 0
    for v in g.inputs():
        loadable_base |= 1 << index[v]

    # Per output chain (i, j): the C bit of each layer, and the A/B inputs
    # still required once the chain has reached a given layer.  Both feed the
    # admissible cost-to-go estimate.
    from .cdag import a_vertex, b_vertex, c_vertex

    chains = []
    for i in range(1, g.m + 1):
        for j in range(1, g.n + 1):
            layer_bits = [index[c_vertex(i, j, r)] for r in range(1, g.k + 1)]
            pending_after = []
            for have in range(0, g.k + 1):
                mask = 0
                for r in range(have + 1, g.k + 1):
                    mask |= 1 << index[a_vertex(i, r)]
                    mask |= 1 << index[b_vertex(r, j)]
                pending_after.append(mask)
            chains.append((layer_bits, pending_after))

    def cost_to_go(red: int, stored: int) -> int:
        # Each unfinished chain needs one store; every input feeding layers
        # above the highest live partial sum must be (re)loaded.
        pending = 0
        stores_needed = 0
        live = red | stored
        for layer_bits, pending_after in chains:
            top = layer_bits[-1]
            if stored >> top & 1:
                continue
            stores_needed += 1
            have = 0
            for r in range(g.k, 0, -1):
                if live >> layer_bits[r - 1] & 1:
                    have = r
                    break
            pending |= pending_after[have]
        return stores_needed + (pending & ~red).bit_count()

    # Any schedule loads each input at least once and stores each output.
    budget_floor = g.m * g.k + g.k * g.n + g.m * g.n
    # Reloading both operands for every multiplication is always legal.
    budget_ceiling = 2 * g.m * g.n * g.k + g.m * g.n

    def search(budget: int) -> bool:
        # memo: best I/O seen per (red, stored); frontier: dominance lists.
        # Red pebbles are dropped lazily: an eviction is fused with the move
        # that needs the slot, so a state's successors are never its subsets
        # and dominance pruning (superset red, same stored, no more I/O spent
        # implies never-better) stays compatible with the move generation.
        memo: dict[tuple[int, int], int] = {}
        frontier: dict[int, list[tuple[int, int]]] = {}

        def dominated(red: int, stored: int, io: int) -> bool:
            entries = frontier.get(stored)
            if entries is None:
                return False
            for red2, io2 in entries:
                if io2 <= io and red & red2 == red and red != red2:
                    return True
            return False

        def remember(red: int, stored: int, io: int) -> None:
            entries = frontier.setdefault(stored, [])
            entries[:] = [
                (r2, io2)
                for r2, io2 in entries
                if not (io <= io2 and r2 & red == r2 and r2 != red)
            ]
            if len(entries) < 128:
                entries.append((red, io))

        def close(red: int) -> int:
            # Apply every compute that fits: free moves, and the resulting
            # state dominates its predecessor (evictions happen lazily).
            changed = True
            while changed:
                changed = False
                for i in c_indices:
                    bit = 1 << i
                    if red & bit:
                        continue
                    if red & parent_mask[i] != parent_mask[i]:
                        continue
                    new_red = red | bit
                    if chain[i] >= 0:
                        new_red &= ~(1 << chain[i])
                    if new_red.bit_count() <= S:
                        red = new_red
                        changed = True
            return red

        def dfs(red: int, stored: int, io: int) -> bool:
            red = close(red)
            if stored & outputs_mask == outputs_mask:
                return True
            if io + cost_to_go(red, stored) > budget:
                return False
            key = (red, stored)
            prev = memo.get(key)
            if prev is not None and prev <= io:
                return False
            if dominated(red, stored, io):
                return False
            memo[key] = io
            remember(red, stored, io)

            filled = red.bit_count()

            # First-layer computes blocked only by capacity: evict one
            # non-parent pebble in the same (free) step.
            if filled == S:
                for i in c_indices:
                    bit = 1 << i
                    if red & bit or chain[i] >= 0:
                        continue
                    if red & parent_mask[i] != parent_mask[i]:
                        continue
                    evictable = red & ~parent_mask[i]
                    while evictable:
                        e = evictable & -evictable
                        evictable &= evictable - 1
                        if dfs((red | bit) & ~e, stored, io):
                            return True

            if io < budget:
                # Stores: outputs first, then spills of intermediate sums.
                for i in c_indices:
                    bit = 1 << i
                    if red & bit and not stored & bit and outputs_mask & bit:
                        if dfs(red, stored | bit, io + 1):
                            return True
                for i in c_indices:
                    bit = 1 << i
                    if red & bit and not stored & bit and not outputs_mask & bit:
                        if dfs(red, stored | bit, io + 1):
                            return True
                # Loads from blue (inputs or previously stored values),
                # evicting one resident pebble when memory is full.
                loadable = (loadable_base | stored) & ~red
                while loadable:
                    bit = loadable & -loadable
                    loadable &= loadable - 1
                    if filled < S:
                        if dfs(red | bit, stored, io + 1):
                            return True
                    else:
                        evictable = red
                        while evictable:
                            e = evictable & -evictable
                            evictable &= evictable - 1
                            if dfs((red & ~e) | bit, stored, io + 1):
                                return True
            return False

        return dfs(0, 0, 0)

    for budget in range(budget_floor, budget_ceiling + 1):
        if search(budget):
            return budget
    raise AssertionError("oracle failed to find a schedule within the trivial bound")
