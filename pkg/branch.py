"""
Branch-and-bound module

Mixed-integer conic solver over integer-marked variables (commitment counts)
and a one-of-N disjunction of program extensions (the nadir alternatives).
Nodes are explored best-first on their relaxation bound; ties are broken by
lower depth, then by the lexicographically smallest fixed assignment, so the
result does not depend on anything but the input.

A node with an unresolved disjunction solves the base program. If that
solution is integral and some alternative already holds at it, it is
accepted under that alternative; otherwise the node branches on the
disjunction before branching on variables.

A relaxation that fails numerically is never counted as pruned: a node with
an unresolved disjunction branches on it anyway, any other node stays open at
its parent bound, and the result is marked uncertified when an open bound
could still beat the incumbent.
"""

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config.settings import (
    BOUND_MONOTONE_TOL,
    INTEGRALITY_TOL,
    MAX_NODES,
    MIP_GAP,
    ORACLE_MAX_ASSIGNMENTS,
)
from conic import ConicSolution, SolverSettings, SolveStatus, solve
from errors import BranchError

logger = logging.getLogger(__name__)


class NodeDecision(str, Enum):
    BRANCH_DISJUNCTION = "branch-disjunction"
    BRANCH_VARIABLE = "branch-variable"
    INCUMBENT = "incumbent"
    CANDIDATE = "candidate"
    PRUNED = "pruned-by-bound"
    INFEASIBLE = "infeasible"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass
class Disjunct:
    """One alternative: the base program extended with extra constraints"""
    label: str
    program: object
    holds: Callable[[np.ndarray], bool]


@dataclass
class BranchSettings:
    mip_gap: float = MIP_GAP
    integrality_tol: float = INTEGRALITY_TOL
    bound_tol: float = BOUND_MONOTONE_TOL
    max_nodes: int = MAX_NODES
    priorities: Dict[int, float] = field(default_factory=dict)
    solver: SolverSettings = field(default_factory=SolverSettings)


@dataclass(order=True)
class MiNode:
    sort_key: Tuple
    node_id: int = field(compare=False)
    parent: Optional[int] = field(compare=False)
    depth: int = field(compare=False)
    bounds: Dict[int, Tuple[float, float]] = field(compare=False)
    choice: Optional[int] = field(compare=False)
    bound: float = field(compare=False)


@dataclass
class NodeRecord:
    node_id: int
    parent: Optional[int]
    depth: int
    bound: float
    incumbent: float
    decision: NodeDecision
    detail: str = ""


@dataclass
class BranchStats:
    nodes: int = 0
    solves: int = 0
    pruned: int = 0
    incumbent_updates: int = 0


@dataclass
class MisocpResult:
    solution: ConicSolution
    choice: Optional[int]
    assignment: Dict[int, float]
    stats: BranchStats
    log: List[NodeRecord] = field(default_factory=list)
    # false when a node left open by a numerical failure could still beat the answer
    certified: bool = True
    open_bound: float = np.inf

    @property
    def status(self):
        return self.solution.status

    @property
    def objective(self):
        return self.solution.objective_value


def _make_node(counter, parent, depth, bounds, choice, bound):
    assignment = (-1 if choice is None else choice,) + tuple(
        (j, lo, hi) for j, (lo, hi) in sorted(bounds.items()))
    node_id = next(counter)
    return MiNode((bound, depth, assignment, node_id), node_id, parent, depth, bounds, choice, bound)


def _node_program(program, disjuncts, choice, bounds):
    base = program if choice is None else disjuncts[choice].program
    return base.with_bounds(bounds) if bounds else base


def _infeasible_result(program, stats, log, open_bound=np.inf):
    n, m = program.n_vars, program.n_rows
    certified = open_bound == np.inf
    status = SolveStatus.INFEASIBLE if certified else SolveStatus.NUMERICAL_FAILURE
    message = ("No integer-feasible solution found." if certified
               else "No solution found; nodes that failed numerically were left open.")
    solution = ConicSolution(
        status=status, x=np.full(n, np.nan), y=np.full(m, np.nan),
        z=np.full(n, np.nan), objective_value=np.inf, gap=np.inf, kkt_residual=np.inf,
        message=message,
    )
    return MisocpResult(solution, None, {}, stats, log, certified, open_bound)


def _most_fractional(x, integers, settings):
    best = None
    best_key = None
    for j in integers:
        frac = abs(x[j] - round(x[j]))
        if frac <= settings.integrality_tol:
            continue
        # fractionality compared on a coarse grid so that priorities decide near-ties
        key = (round(frac, 6), settings.priorities.get(j, 0.0), -j)
        if best_key is None or key > best_key:
            best, best_key = j, key
    return best


def _cutoff(incumbent, settings):
    if incumbent is None:
        return np.inf
    value = incumbent.objective_value
    return value - settings.mip_gap * max(1.0, abs(value))


def solve_misocp(program, disjuncts=(), settings=None):
    """
    Best-first branch-and-bound

    Args:
        program: base ConicProgram with integer_marks (may be empty)
        disjuncts: sequence of Disjunct; exactly one must be enforced. Each
            disjunct program extends the base program, whose variables come first.
        settings: BranchSettings

    Returns:
        MisocpResult with the best solution, the chosen disjunct index and the node log
    """
    settings = settings or BranchSettings()
    disjuncts = list(disjuncts)
    integers = sorted(program.integer_marks)
    n_base = program.n_vars
    lower, upper = program.bounds()
    root_bounds = {j: (float(lower[j]), float(upper[j])) for j in integers}

    counter = itertools.count()
    heap = [_make_node(counter, None, 0, root_bounds, None, -np.inf)]
    stats = BranchStats()
    log = []
    incumbent = None
    incumbent_choice = None
    incumbent_assignment = {}
    open_bounds = []

    def record(node, decision, detail=""):
        value = incumbent.objective_value if incumbent is not None else np.inf
        log.append(NodeRecord(node.node_id, node.parent, node.depth, node.bound, value, decision, detail))

    def offer(candidate, choice, node):
        nonlocal incumbent, incumbent_choice, incumbent_assignment
        if candidate is None or not candidate.is_optimal:
            return
        value = candidate.objective_value
        if incumbent is None or value < incumbent.objective_value - 1e-9 * max(1.0, abs(value)):
            incumbent = candidate
            incumbent_choice = choice
            incumbent_assignment = {j: float(round(candidate.x[j])) for j in integers}
            stats.incumbent_updates += 1
            logger.debug("node %d: new incumbent %.10g (choice %s)", node.node_id, value, choice)
            record(node, NodeDecision.INCUMBENT, f"objective={value:.10g}")
        else:
            record(node, NodeDecision.CANDIDATE, f"objective={value:.10g}")

    def polish(x, choice, node):
        fixed = dict(node.bounds)
        for j in integers:
            v = float(round(x[j]))
            fixed[j] = (v, v)
        sol = solve(_node_program(program, disjuncts, choice, fixed), settings.solver)
        stats.solves += 1
        if not sol.is_optimal:
            logger.debug("node %d: polish solve ended %s", node.node_id, sol.status.value)
            return None
        return sol

    def split_disjunction(node, bound, decision=NodeDecision.BRANCH_DISJUNCTION, detail=""):
        record(node, decision, detail)
        for k in range(len(disjuncts)):
            heapq.heappush(heap, _make_node(counter, node.node_id, node.depth + 1,
                                            dict(node.bounds), k, bound))

    while heap:
        node = heapq.heappop(heap)
        if stats.nodes >= settings.max_nodes:
            logger.warning("node limit %d reached; returning best solution found", settings.max_nodes)
            open_bounds.extend(pending.bound for pending in heap)
            open_bounds.append(node.bound)
            break
        stats.nodes += 1
        if node.bound >= _cutoff(incumbent, settings):
            stats.pruned += 1
            record(node, NodeDecision.PRUNED)
            continue

        sol = solve(_node_program(program, disjuncts, node.choice, node.bounds), settings.solver)
        stats.solves += 1
        if sol.status is SolveStatus.NUMERICAL_FAILURE:
            if disjuncts and node.choice is None:
                logger.warning("node %d: relaxation failed numerically (%s); branching on the disjunction",
                               node.node_id, sol.message)
                split_disjunction(node, node.bound, NodeDecision.NUMERICAL_FAILURE, "branch-disjunction")
            else:
                logger.warning("node %d: relaxation failed numerically (%s); left open at bound %.10g",
                               node.node_id, sol.message, node.bound)
                record(node, NodeDecision.NUMERICAL_FAILURE, "open")
                open_bounds.append(node.bound)
            continue
        if not sol.is_optimal:
            record(node, NodeDecision.INFEASIBLE, sol.status.value)
            continue

        value = sol.objective_value
        if np.isfinite(node.bound) and value < node.bound - settings.bound_tol * max(1.0, abs(node.bound)):
            raise BranchError(f"node {node.node_id}: relaxation bound {value:.10g} "
                              f"below parent bound {node.bound:.10g}")
        value = max(value, node.bound)
        if value >= _cutoff(incumbent, settings):
            stats.pruned += 1
            record(node, NodeDecision.PRUNED, f"bound={value:.10g}")
            continue

        x = sol.x[:n_base]
        j = _most_fractional(x, integers, settings)
        if disjuncts and node.choice is None:
            accepted = None
            if j is None:
                accepted = next((k for k, d in enumerate(disjuncts) if d.holds(x)), None)
            if accepted is not None:
                polished = polish(x, accepted, node)
                if polished is not None:
                    offer(polished, accepted, node)
                    continue
                logger.debug("node %d: accepted alternative %d not confirmed; branching", node.node_id, accepted)
            split_disjunction(node, value)
            continue

        if j is None:
            # the relaxation is integral within tolerance, so it stands in for a failed polish
            offer((polish(x, node.choice, node) if integers else None) or sol, node.choice, node)
            continue

        lo, hi = node.bounds[j]
        down, up = math.floor(x[j]), math.ceil(x[j])
        record(node, NodeDecision.BRANCH_VARIABLE, f"x[{j}]={x[j]:.6g}")
        for child_lo, child_hi in ((lo, float(down)), (float(up), hi)):
            if child_lo > child_hi:
                continue
            bounds = dict(node.bounds)
            bounds[j] = (child_lo, child_hi)
            heapq.heappush(heap, _make_node(counter, node.node_id, node.depth + 1,
                                            bounds, node.choice, value))

    logger.info("branch-and-bound: %d nodes, %d solves, %d pruned, objective %s",
                stats.nodes, stats.solves, stats.pruned,
                f"{incumbent.objective_value:.10g}" if incumbent is not None else "none")
    open_bound = min(open_bounds, default=np.inf)
    if incumbent is None:
        return _infeasible_result(program, stats, log, open_bound)
    certified = open_bound >= _cutoff(incumbent, settings)
    if not certified:
        logger.warning("open nodes with bound %.10g remain below the incumbent %.10g; optimality not certified",
                       open_bound, incumbent.objective_value)
    return MisocpResult(incumbent, incumbent_choice, incumbent_assignment, stats, log, certified, open_bound)


def enumerate_oracle(program, disjuncts=(), settings=None):
    """
    Exhaustive enumeration of integer assignments x disjunct choices

    Every combination is solved as a convex program with the integers fixed;
    ties keep the lexicographically first combination.

    Args:
        program: base ConicProgram with finite bounds on every integer variable
        disjuncts: sequence of Disjunct
        settings: BranchSettings (only the solver settings are used)

    Returns:
        MisocpResult with the same contract as solve_misocp
    """
    settings = settings or BranchSettings()
    disjuncts = list(disjuncts)
    integers = sorted(program.integer_marks)
    lower, upper = program.bounds()
    ranges = []
    for j in integers:
        if not (np.isfinite(lower[j]) and np.isfinite(upper[j])):
            raise BranchError(f"integer variable {j} needs finite bounds for enumeration")
        ranges.append(range(math.ceil(lower[j] - 1e-9), math.floor(upper[j] + 1e-9) + 1))
    choices = list(range(len(disjuncts))) or [None]
    total = len(choices)
    for r in ranges:
        total *= len(r)
    if total > ORACLE_MAX_ASSIGNMENTS:
        raise BranchError(f"enumeration of {total} combinations exceeds the limit {ORACLE_MAX_ASSIGNMENTS}")

    stats = BranchStats()
    best = None
    best_choice = None
    best_assignment = {}
    for values in itertools.product(*ranges):
        fixed = {j: (float(v), float(v)) for j, v in zip(integers, values)}
        for choice in choices:
            sol = solve(_node_program(program, disjuncts, choice, fixed), settings.solver)
            stats.solves += 1
            stats.nodes += 1
            if not sol.is_optimal:
                continue
            value = sol.objective_value
            if best is None or value < best.objective_value - 1e-9 * max(1.0, abs(value)):
                best, best_choice = sol, choice
                best_assignment = {j: float(v) for j, v in zip(integers, values)}
                stats.incumbent_updates += 1
    logger.info("enumeration: %d convex solves", stats.solves)
    if best is None:
        return _infeasible_result(program, stats, [])
    return MisocpResult(best, best_choice, best_assignment, stats, [])


def node_log_frame(result):
    """Node log as a DataFrame (node id, parent, depth, bound, incumbent, decision)"""
    rows = [{
        "node_id": r.node_id,
        "parent": r.parent if r.parent is not None else "",
        "depth": r.depth,
        "bound": r.bound,
        "incumbent": r.incumbent,
        "decision": r.decision.value,
        "detail": r.detail,
    } for r in result.log]
    return pd.DataFrame(rows, columns=["node_id", "parent", "depth", "bound", "incumbent", "decision", "detail"])
