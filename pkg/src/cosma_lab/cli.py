"""Command-line front end: plan, simulate, compare, pebble.

JSON is the canonical machine-readable format; text output is for humans and
carries no stability guarantee.  Exit codes: 0 success, 2 infeasible input,
3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import parsched, pebbling, plots, seqsched, simulate
from .cdag import build_mmm_cdag, sequential_lower_bound
from .errors import CosmaLabError, InfeasibleError, SimulationInvariantError

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INTERNAL = 3

FORMATS = ("text", "json", "csv")


@dataclass
class RunConfig:
    m: int
    n: int
    k: int
    p: int = 1
    S: int = 4
    delta: float = parsched.DELTA_DEFAULT
    strategy: str = "all"
    seed: int = 0
    format: str = "text"


def _add_dims(ap: argparse.ArgumentParser, with_p: bool = True) -> None:
    ap.add_argument("--m", type=int, required=True, help="rows of A and C")
    ap.add_argument("--n", type=int, required=True, help="columns of B and C")
    ap.add_argument("--k", type=int, required=True, help="shared dimension")
    if with_p:
        ap.add_argument("--p", type=int, required=True, help="number of ranks")
    ap.add_argument("--S", type=int, required=True, dest="S",
                    help="fast-memory words per rank")
    ap.add_argument("--format", choices=FORMATS, default="text")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cosma-lab",
        description="Communication-optimal matrix multiplication: planning, "
        "cost models, pebble games, and a message-counting simulator.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="fit a processor grid and local domain")
    _add_dims(plan)
    plan.add_argument("--delta", type=float, default=parsched.DELTA_DEFAULT,
                      help="tolerated idle-rank fraction")

    sim = sub.add_parser("simulate", help="run the rank simulator")
    _add_dims(sim)
    sim.add_argument("--delta", type=float, default=parsched.DELTA_DEFAULT)
    sim.add_argument("--seed", type=int, default=0, help="seed for generated inputs")
    sim.add_argument("--a-file", help="load A instead of generating it "
                     "(.txt for the text format, anything else binary)")
    sim.add_argument("--b-file", help="load B instead of generating it")
    sim.add_argument("--threads", type=int, default=None,
                     help=f"simulator workers (default ${simulate.THREADS_ENV} or 1)")
    sim.add_argument("--plot-dir", help="write per-rank figures into this directory")

    cmp_ = sub.add_parser("compare", help="per-strategy cost table")
    _add_dims(cmp_)
    cmp_.add_argument("--delta", type=float, default=parsched.DELTA_DEFAULT)
    cmp_.add_argument("--strategy", choices=(*parsched.STRATEGIES, "all"),
                      default="all")
    cmp_.add_argument("--plot-dir", help="write cost figures next to the table")

    peb = sub.add_parser("pebble", help="pebble-game oracle vs greedy schedule")
    peb.add_argument("--m", type=int, required=True)
    peb.add_argument("--n", type=int, required=True)
    peb.add_argument("--k", type=int, required=True)
    peb.add_argument("--S", type=int, required=True, dest="S")
    peb.add_argument("--format", choices=FORMATS, default="text")
    peb.add_argument("--oracle-cap", type=int, default=pebbling.DEFAULT_ORACLE_CAP,
                     help="skip the exact search above this vertex count")
    peb.add_argument("--dump-schedule", metavar="FILE",
                     help="write the greedy tile table as CSV")
    return ap


def _emit(doc: dict, fmt: str, text_lines: list[str], csv_text: str) -> None:
    if fmt == "json":
        print(json.dumps(doc, indent=2))
    elif fmt == "csv":
        sys.stdout.write(csv_text)
    else:
        print("\n".join(text_lines))


# -- plan ----------------------------------------------------------------------


def cmd_plan(args) -> int:
    doc = parsched.plan_document(args.m, args.n, args.k, args.p, args.S, args.delta)
    g = doc["grid"]
    d = doc["domain"]
    q = doc["predicted"]
    lines = [
        f"grid      {g['pm']} x {g['pn']} x {g['pk']}  ({g['used']} ranks, {g['idle']} idle)",
        f"domain    a={d['a']} b={d['b']}  step={d['step_size']} cols  rounds={d['steps']}",
        f"words     {q['q_words']:.3f} per rank (inter-rank: {q['q_inter_rank']:.3f})",
        f"latency   {q['latency_formula']:.3f} (model) / {q['latency_rounds']} rounds",
    ]
    header = "m,n,k,p,S,delta,pm,pn,pk,used,idle,a,b,step_size,steps,q_words,latency_rounds\n"
    row = (
        f"{args.m},{args.n},{args.k},{args.p},{args.S},{args.delta},"
        f"{g['pm']},{g['pn']},{g['pk']},{g['used']},{g['idle']},"
        f"{d['a']},{d['b']},{d['step_size']},{d['steps']},"
        f"{q['q_words']},{q['latency_rounds']}\n"
    )
    _emit(doc, args.format, lines, header + row)
    return EXIT_OK


# -- compare -------------------------------------------------------------------


def _compare_costs(args) -> list[parsched.CostEstimate]:
    costs = parsched.all_strategy_costs(args.m, args.n, args.k, args.p, args.S)
    if args.strategy != "all":
        costs = [c for c in costs if c.strategy == args.strategy]
    return costs


def compare_csv(costs: list[parsched.CostEstimate]) -> str:
    lines = ["strategy,q,l"]
    lines += [f"{c.strategy},{c.q!r},{c.l!r}" for c in costs]
    return "\n".join(lines) + "\n"


def cmd_compare(args) -> int:
    # The cost table is a real-valued model; it prices infeasible
    # configurations too rather than rejecting them.
    costs = _compare_costs(args)
    doc = {
        "dims": {"m": args.m, "n": args.n, "k": args.k},
        "machine": {"p": args.p, "S": args.S},
        "strategies": [{"strategy": c.strategy, "q": c.q, "l": c.l} for c in costs],
    }
    lines = [f"{'strategy':<10} {'Q (words/rank)':>16} {'L (messages)':>14}"]
    lines += [f"{c.strategy:<10} {c.q:>16.3f} {c.l:>14.3f}" for c in costs]
    csv_text = compare_csv(costs)
    _emit(doc, args.format, lines, csv_text)

    if args.plot_dir:
        out = Path(args.plot_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "compare.csv").write_text(csv_text)
        plots.save_strategy_bar(
            costs, out / "compare_q_bar.png",
            title=f"m={args.m} n={args.n} k={args.k} p={args.p} S={args.S}",
        )
        plots.save_cost_sweep(args.m, args.n, args.k, args.S, args.p,
                              out / "compare_q_vs_p.png")
    return EXIT_OK


# -- simulate ------------------------------------------------------------------


def _load_matrix_arg(path: str) -> np.ndarray:
    if path.endswith(".txt"):
        return simulate.load_matrix_text(path)
    return simulate.load_matrix(path)


def cmd_simulate(args) -> int:
    if args.a_file or args.b_file:
        if not (args.a_file and args.b_file):
            raise InfeasibleError("provide both --a-file and --b-file or neither")
        A = _load_matrix_arg(args.a_file)
        B = _load_matrix_arg(args.b_file)
        if A.shape != (args.m, args.k) or B.shape != (args.k, args.n):
            raise InfeasibleError(
                f"file dims {A.shape}x{B.shape} do not match --m/--n/--k"
            )
    else:
        rng = np.random.default_rng(args.seed)
        A = rng.uniform(-1.0, 1.0, (args.m, args.k))
        B = rng.uniform(-1.0, 1.0, (args.k, args.n))

    machine = parsched.Machine(p=args.p, S=args.S, delta=args.delta)
    C, stats = simulate.run_cosma(A, B, machine, workers=args.threads)

    c_ref = A @ B
    max_err = float(np.max(np.abs(C - c_ref))) if C.size else 0.0
    tol = simulate.correctness_tolerance(A, B)
    ok = max_err <= tol
    pred = parsched.predicted_io(args.m, args.n, args.k, args.p, args.S)
    ratio = simulate.measured_vs_predicted(stats, pred) if pred > 0 else 0.0

    doc = {
        "dims": {"m": args.m, "n": args.n, "k": args.k},
        "machine": {"p": args.p, "S": args.S, "delta": args.delta},
        "seed": args.seed,
        "correctness": {"max_abs_err": max_err, "tolerance": tol, "ok": ok},
        "predicted_io": pred,
        "measured_vs_predicted": ratio,
        "stats": stats.to_json_dict(),
    }
    lines = [
        f"grid        {stats.grid[0]} x {stats.grid[1]} x {stats.grid[2]}",
        f"rounds      {stats.rounds[0] if stats.rounds else 0}",
        f"comm        max {stats.max_per_rank} words/rank, mean {stats.mean_per_rank:.2f}",
        f"predicted   {pred:.3f} words/rank (measured/predicted = {ratio:.4f})",
        f"padding     {stats.padded_words} words moved",
        f"numerics    max |C - ref| = {max_err:.3e} (tol {tol:.3e}) -> {'ok' if ok else 'FAIL'}",
    ]
    _emit(doc, args.format, lines, stats.to_csv())

    if args.plot_dir:
        out = Path(args.plot_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "simulate.csv").write_text(stats.to_csv())
        plots.save_comm_profile(stats, out / "simulate_per_rank.png")

    if not ok:
        print(f"numerical check failed: {max_err} > {tol}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


# -- pebble --------------------------------------------------------------------


def cmd_pebble(args) -> int:
    g = build_mmm_cdag(args.m, args.n, args.k)
    sched = seqsched.emit_schedule(args.m, args.n, args.k, args.S)
    moves = seqsched.schedule_to_pebbling(sched)
    loads, stores = pebbling.validate_pebbling(g, args.S, moves)
    traced = seqsched.trace_io(sched, args.S)
    if traced != (loads, stores):
        print(f"trace {traced} disagrees with pebbling tally {(loads, stores)}",
              file=sys.stderr)
        return EXIT_INTERNAL

    oracle: int | None = None
    skipped = None
    if g.num_vertices <= args.oracle_cap:
        oracle = pebbling.brute_force_optimal_io(g, args.S, cap=args.oracle_cap)
    else:
        skipped = f"{g.num_vertices} vertices exceed the oracle cap {args.oracle_cap}"

    bound = sequential_lower_bound(args.m, args.n, args.k, args.S)
    doc = {
        "dims": {"m": args.m, "n": args.n, "k": args.k},
        "S": args.S,
        "lower_bound": bound,
        "greedy": {
            "tile_a": sched.tile.a,
            "tile_b": sched.tile.b,
            "loads": loads,
            "stores": stores,
            "total": loads + stores,
        },
        "oracle": {"io": oracle, "skipped": skipped},
    }
    lines = [
        f"lower bound  {bound:.3f}",
        f"greedy       tile {sched.tile.a}x{sched.tile.b}: "
        f"{loads} loads + {stores} stores = {loads + stores}",
        f"oracle       {oracle if oracle is not None else f'skipped ({skipped})'}",
    ]
    header = "m,n,k,S,lower_bound,greedy_loads,greedy_stores,greedy_total,oracle\n"
    row = (
        f"{args.m},{args.n},{args.k},{args.S},{bound!r},{loads},{stores},"
        f"{loads + stores},{'' if oracle is None else oracle}\n"
    )
    _emit(doc, args.format, lines, header + row)

    if args.dump_schedule:
        Path(args.dump_schedule).write_text(seqsched.schedule_tiles_csv(sched))
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    handlers = {
        "plan": cmd_plan,
        "simulate": cmd_simulate,
        "compare": cmd_compare,
        "pebble": cmd_pebble,
    }
    try:
        return handlers[args.command](args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SimulationInvariantError as exc:
        print(f"internal invariant failed: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except CosmaLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
