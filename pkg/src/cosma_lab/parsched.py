"""Parallel decomposition: local domains, processor-grid fitting, cost models.

Each rank owns an [a x a x b] brick of the iteration space: b rank-1 updates
of an a x a block of C.  Per brick, the communicated volume is the two input
panels (2ab words) plus the partial-result block (a^2 words), so planning
minimizes that volume subject to the memory constraint a^2 <= S and the load
balance constraint a^2 b = mnk/p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import InfeasibleError

DELTA_DEFAULT = 0.03

STRATEGY_2D = "2D"
STRATEGY_25D = "2.5D"
STRATEGY_RECURSIVE = "recursive"
STRATEGY_COSMA = "COSMA"
STRATEGIES = (STRATEGY_2D, STRATEGY_25D, STRATEGY_RECURSIVE, STRATEGY_COSMA)


@dataclass(frozen=True)
class Machine:
    """p ranks, S words of fast memory each, and the tolerated idle fraction."""

    p: int
    S: int
    delta: float = DELTA_DEFAULT

    def __post_init__(self):
        if self.p < 1 or self.S < 4:
            raise ValueError(f"need p >= 1 and S >= 4, got p={self.p}, S={self.S}")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")


@dataclass(frozen=True)
class LocalDomain:
    """Per-rank brick: a x a block of C, b outer products, t rounds of s columns."""

    a: int
    b: int
    steps: int
    step_size: int


@dataclass(frozen=True)
class ProcessorGrid:
    pm: int
    pn: int
    pk: int
    ranks_total: int

    @property
    def used(self) -> int:
        return self.pm * self.pn * self.pk

    @property
    def idle(self) -> int:
        return self.ranks_total - self.used

    @property
    def idle_fraction(self) -> float:
        return self.idle / self.ranks_total

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.pm, self.pn, self.pk)


@dataclass(frozen=True)
class CostEstimate:
    """Modeled words communicated (q) and messages (l) per rank."""

    strategy: str
    q: float
    l: float


def memory_required(m: int, n: int, k: int) -> int:
    return m * n + m * k + n * k


def check_memory(m: int, n: int, k: int, p: int, S: int) -> None:
    need = memory_required(m, n, k)
    if p * S < need:
        raise InfeasibleError(
            f"matrices need p*S >= {need} words in aggregate, "
            f"got p*S = {p * S} (p={p}, S={S})"
        )


def step_size(a: int, S: int) -> int:
    """Columns per communication round: floor((S - a^2) / 2a), at least 1.

    The floor is 0 when the block uses all of memory (a^2 = S); a round then
    still has to move at least one column, so the value is clamped.
    """
    return max(1, (S - a * a) // (2 * a))


def steps_for(b: int, s: int) -> int:
    return math.ceil(b / s)


# -- grid fitting -------------------------------------------------------------


def factor_triples(p: int) -> list[tuple[int, int, int]]:
    """All ordered (pm, pn, pk) with pm * pn * pk = p, ascending."""
    out = []
    for pm in range(1, p + 1):
        if p % pm:
            continue
        rest = p // pm
        for pn in range(1, rest + 1):
            if rest % pn:
                continue
            out.append((pm, pn, rest // pn))
    return out


def grid_comm_cost(m: int, n: int, k: int, pm: int, pn: int, pk: int) -> Fraction:
    """Per-rank communicated words for a grid, with real-valued block sizes.

    Input panels of A and B plus the output C block; fractional divisions
    model "stretched" local domains when the grid does not divide the
    dimensions evenly.
    """
    bm = Fraction(m, pm)
    bn = Fraction(n, pn)
    bk = Fraction(k, pk)
    return bm * bk + bn * bk + bm * bn


def fit_ranks(
    m: int, n: int, k: int, p: int, S: int, delta: float = DELTA_DEFAULT
) -> tuple[ProcessorGrid, LocalDomain]:
    """Pick the communication-minimal grid using at least (1 - delta) * p ranks.

    Enumerates factor triples of every admissible rank count, keeps the grids
    whose C block fits in fast memory, and minimizes the modeled per-rank
    volume.  Ties prefer more ranks, then fewer k-splits, then the
    lexicographically smallest shape.
    """
    if p < 1:
        raise ValueError(f"p must be positive, got {p}")
    p_low = max(1, math.ceil((1.0 - delta) * p))

    candidates: list[tuple[Fraction, int, int, tuple[int, int, int]]] = []
    fallback: list[tuple[Fraction, int, int, tuple[int, int, int]]] = []
    for p_used in range(p_low, p + 1):
        for pm, pn, pk in factor_triples(p_used):
            cost = grid_comm_cost(m, n, k, pm, pn, pk)
            entry = (cost, -p_used, pk, (pm, pn, pk))
            blocks = math.ceil(m / pm) * math.ceil(n / pn)
            if blocks <= S:
                candidates.append(entry)
            else:
                fallback.append(entry)

    pool = candidates or fallback  # degenerate memory: best effort
    _, neg_used, _, (pm, pn, pk) = min(pool)
    grid = ProcessorGrid(pm, pn, pk, ranks_total=p)
    a = max(math.ceil(m / pm), math.ceil(n / pn))
    b = math.ceil(k / pk)
    s = step_size(a, S)
    return grid, LocalDomain(a=a, b=b, steps=steps_for(b, s), step_size=s)


def optimal_domain(m: int, n: int, k: int, p: int, S: int) -> LocalDomain:
    """Communication-optimal per-rank brick.

    The real-valued solution is a = min(sqrt(S), (mnk/p)^(1/3)) with
    b = mnk/(p a^2); integer values come from the fitted grid.  A single rank
    degenerates to the sequential regime: the brick describes its internal
    memory-bounded pass, not a block of a grid.
    """
    check_memory(m, n, k, p, S)
    if p == 1:
        a = min(math.isqrt(S), round((m * n * k) ** (1 / 3)))
        a = max(1, min(a, m, n))
        b = max(1, round(m * n * k / (p * a * a)))
        s = step_size(a, S)
        return LocalDomain(a=a, b=b, steps=steps_for(b, s), step_size=s)
    _, domain = fit_ranks(m, n, k, p, S)
    return domain


# -- cost models --------------------------------------------------------------


def _cbrt(v: float) -> float:
    x = v ** (1 / 3)
    r = round(x)
    if r > 0 and math.isclose(r * r * r, v, rel_tol=1e-12):
        return float(r)  # keep exact cubes exact despite float noise
    return x


def _domain_face(m: int, n: int, k: int, p: int, S: int) -> float:
    return min(math.sqrt(S), _cbrt(m * n * k / p))


def _cosma_q(m: int, n: int, k: int, p: int, S: int) -> float:
    a = _domain_face(m, n, k, p, S)
    return 2.0 * (m * n * k / p) / a + a * a


def predicted_io(m: int, n: int, k: int, p: int, S: int) -> float:
    """Per-rank I/O of the optimal parallel schedule: 2mnk/(pa) + a^2.

    The brick face a = min(sqrt(S), (mnk/p)^(1/3)) selects between the
    memory-binding branch 2mnk/(p sqrt(S)) + S and the cubic branch
    3 (mnk/p)^(2/3); the two coincide at mnk = p S^(3/2).
    """
    check_memory(m, n, k, p, S)
    return _cosma_q(m, n, k, p, S)


def strategy_cost(strategy: str, m: int, n: int, k: int, p: int, S: int) -> CostEstimate:
    """General-case (Q, L) model for one decomposition strategy.

    The recursive and COSMA rows select their memory-binding or cubic branch
    by the feasible local-domain shape rather than by a blind minimum: with
    binding memory the cubic branch describes an unreachable domain (its face
    exceeds S) even where it evaluates smaller.
    """
    v = m * n * k / p
    if strategy == STRATEGY_2D:
        q = k * (m + n) / math.sqrt(p) + m * n / p
        lat = 2.0 * k * math.log2(math.sqrt(p)) if p > 1 else 0.0
        return CostEstimate(strategy, q, lat)

    if strategy == STRATEGY_25D:
        q = (k * (m + n)) ** 1.5 / (p * math.sqrt(S)) + m * n * S / (k * (m + n))
        denom = p * S**1.5 * (k * m + k * n - m * n)
        c = p * S / (m * k + n * k)
        if denom <= 0:
            lat = math.inf
        else:
            lat = (k * (m + n)) ** 2.5 / denom + 3.0 * max(0.0, math.log2(max(c, 1.0)))
        return CostEstimate(strategy, q, lat)

    if strategy == STRATEGY_RECURSIVE:
        cubic = _cbrt(v) ** 2
        if S <= 3.0 * cubic:  # memory-binding: faces limited to sqrt(S/3)
            inputs = math.sqrt(3.0) * v / math.sqrt(S)
        else:
            inputs = cubic
        q = 2.0 * inputs + cubic
        lat = 3.0**1.5 * m * n * k / (p * S**1.5) + 3.0 * math.log2(p) if p > 1 else 0.0
        return CostEstimate(strategy, q, lat)

    if strategy == STRATEGY_COSMA:
        q = _cosma_q(m, n, k, p, S)
        a = _domain_face(m, n, k, p, S)
        b = max(m * n * k / (p * S), _cbrt(v))
        free = S - a * a
        if free <= 0:
            lat = math.inf
        else:
            lat = (2.0 * a * b / free) * max(0.0, math.log2(max(m * n / (a * a), 1.0)))
        return CostEstimate(strategy, q, lat)

    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def all_strategy_costs(m: int, n: int, k: int, p: int, S: int) -> list[CostEstimate]:
    return [strategy_cost(name, m, n, k, p, S) for name in STRATEGIES]


def io_latency_tradeoff(
    m: int, n: int, k: int, p: int, S: int, h: int | None = None
) -> CostEstimate:
    """Trade rounds against step size: send a*h words per step.

    Q = 2mnk/(pa) + a^2 is independent of h; L = ceil(b/h).  The step buffer
    must fit next to the partials: a^2 + 2ah <= S.
    """
    domain = optimal_domain(m, n, k, p, S)
    a, b = domain.a, domain.b
    h_max = (S - a * a) // (2 * a)
    if h is None:
        h = domain.step_size
    if h < 1 or a * a + 2 * a * h > S:
        raise InfeasibleError(
            f"step of {h} outer products needs {a * a + 2 * a * h} words "
            f"(S={S}); the largest feasible h is {max(h_max, 0)}"
        )
    q = 2.0 * m * n * k / (p * a) + a * a
    return CostEstimate(STRATEGY_COSMA, q, float(math.ceil(b / h)))


# -- report document ----------------------------------------------------------


def plan_document(
    m: int, n: int, k: int, p: int, S: int, delta: float = DELTA_DEFAULT
) -> dict:
    """Full planning report as a JSON-ready dict."""
    check_memory(m, n, k, p, S)
    if p == 1:
        grid = ProcessorGrid(1, 1, 1, ranks_total=1)
        domain = optimal_domain(m, n, k, p, S)
    else:
        grid, domain = fit_ranks(m, n, k, p, S, delta)
    q_model = predicted_io(m, n, k, p, S)
    cosma = strategy_cost(STRATEGY_COSMA, m, n, k, p, S)
    return {
        "dims": {"m": m, "n": n, "k": k},
        "machine": {"p": p, "S": S, "delta": delta},
        "grid": {
            "pm": grid.pm,
            "pn": grid.pn,
            "pk": grid.pk,
            "used": grid.used,
            "idle": grid.idle,
        },
        "domain": {
            "a": domain.a,
            "b": domain.b,
            "step_size": domain.step_size,
            "steps": domain.steps,
        },
        "predicted": {
            "q_words": q_model,
            "q_inter_rank": 0.0 if p == 1 else q_model,
            "latency_formula": cosma.l,
            "latency_rounds": domain.steps,
        },
        "strategies": [
            {"strategy": c.strategy, "q": c.q, "l": c.l}
            for c in all_strategy_costs(m, n, k, p, S)
        ],
    }
