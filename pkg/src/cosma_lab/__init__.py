"""Communication-optimal matrix multiplication lab.

Models classical MMM as a red-blue pebble game on its computation graph,
derives near-I/O-optimal sequential tilings and communication-optimal
parallel decompositions, prices competing decomposition strategies, and
executes the parallel schedule on a message-counting rank simulator.
"""

from .cdag import (
    CDAG,
    Vertex,
    XPartition,
    a_vertex,
    b_vertex,
    build_mmm_cdag,
    c_vertex,
    computational_intensity,
    dominator_set,
    intensity_io_bound,
    minimum_set,
    phi_a,
    phi_b,
    phi_c,
    sequential_lower_bound,
    validate_x_partition,
    x_partition_violation,
)
from .errors import (
    CosmaLabError,
    IllegalMoveError,
    IncompleteCalculationError,
    InfeasibleError,
    SimulationInvariantError,
    SizeCapError,
)
from .parsched import (
    CostEstimate,
    LocalDomain,
    Machine,
    ProcessorGrid,
    STRATEGIES,
    all_strategy_costs,
    fit_ranks,
    grid_comm_cost,
    io_latency_tradeoff,
    optimal_domain,
    plan_document,
    predicted_io,
    strategy_cost,
)
from .pebbling import (
    Move,
    MoveOp,
    brute_force_optimal_io,
    moves_from_text,
    moves_to_text,
    validate_pebbling,
)
from .seqsched import (
    SeqSchedule,
    SeqTile,
    closed_form_io,
    emit_schedule,
    optimal_tile,
    schedule_bricks,
    schedule_to_pebbling,
    schedule_tiles_csv,
    trace_io,
)
from .simulate import (
    BlockedLayout,
    BroadcastTree,
    CommStats,
    build_broadcast_tree,
    decompose_data,
    load_matrix,
    load_matrix_text,
    measured_vs_predicted,
    run_cosma,
    save_matrix,
    save_matrix_text,
)

__version__ = "0.1.0"
