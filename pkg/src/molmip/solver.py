"""Desk-scale exact MILP solving: LP relaxations plus branch-and-bound.

The relaxation engine wraps scipy's HiGHS LP interface (deterministic,
single-threaded); `molmip.simplex` provides an independent dense tableau
implementation that the test suite cross-checks it against. Branch-and-bound
itself lives here: binary branching on the most fractional variable,
best-bound or depth-first node selection, gap-based termination, and a
separate row-level verifier pass on every incumbent.
"""

from __future__ import annotations

import enum
import heapq
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse

from .mip import MipModel, Sense, VarType


class NodeSelection(enum.Enum):
    BEST_BOUND = "best_bound"
    DEPTH_FIRST = "depth_first"


class Branching(enum.Enum):
    MOST_FRACTIONAL = "most_fractional"


class Emphasis(enum.Enum):
    OPTIMALITY = "optimality"
    FEASIBILITY = "feasibility"


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    GAP_REACHED = "gap_reached"
    TIME_LIMIT = "time_limit"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class SolveConfig:
    rel_gap: float = 1e-4
    time_limit: float | None = None
    feasibility_tol: float = 1e-6
    integrality_tol: float = 1e-6
    node_selection: NodeSelection = NodeSelection.BEST_BOUND
    branching: Branching = Branching.MOST_FRACTIONAL
    emphasis: Emphasis = Emphasis.OPTIMALITY
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.rel_gap < 0:
            raise ValueError("rel_gap must be nonnegative")
        if self.feasibility_tol <= 0 or self.integrality_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SolveResult:
    status: SolveStatus
    objective: float | None
    best_bound: float
    gap: float
    nodes_explored: int
    time_to_incumbent: float
    time_total: float
    incumbent: dict[str, float] | None = None


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | failed
    values: np.ndarray | None
    objective: float | None


class _PreparedLp:
    """Matrices built once per model; per-call inputs are bound arrays."""

    def __init__(self, model: MipModel):
        self.model = model
        n = len(model.variables)
        self.n = n
        self.c_min = np.zeros(n)
        sign = -1.0 if model.objective.sense == "max" else 1.0
        for var, coef in model.objective.coeffs.items():
            self.c_min[var] = sign * coef
        self.obj_sign = sign
        rows_ub, rhs_ub, rows_eq, rhs_eq = [], [], [], []
        data_ub, idx_ub, ptr_ub = [], [], [0]
        data_eq, idx_eq, ptr_eq = [], [], [0]
        for con in model.constraints:
            items = sorted(con.coeffs.items())
            if con.sense is Sense.EQ:
                for var, coef in items:
                    idx_eq.append(var)
                    data_eq.append(coef)
                ptr_eq.append(len(idx_eq))
                rhs_eq.append(con.rhs)
            else:
                flip = -1.0 if con.sense is Sense.GE else 1.0
                for var, coef in items:
                    idx_ub.append(var)
                    data_ub.append(flip * coef)
                ptr_ub.append(len(idx_ub))
                rhs_ub.append(flip * con.rhs)
        self.A_ub = (
            scipy.sparse.csr_matrix(
                (data_ub, idx_ub, ptr_ub), shape=(len(rhs_ub), n)
            )
            if rhs_ub
            else None
        )
        self.b_ub = np.array(rhs_ub) if rhs_ub else None
        self.A_eq = (
            scipy.sparse.csr_matrix(
                (data_eq, idx_eq, ptr_eq), shape=(len(rhs_eq), n)
            )
            if rhs_eq
            else None
        )
        self.b_eq = np.array(rhs_eq) if rhs_eq else None
        self.base_lb = np.array([v.lower for v in model.variables])
        self.base_ub = np.array([v.upper for v in model.variables])

    def solve(self, lb: np.ndarray, ub: np.ndarray) -> LpSolution:
        res = scipy.optimize.linprog(
            self.c_min,
            A_ub=self.A_ub,
            b_ub=self.b_ub,
            A_eq=self.A_eq,
            b_eq=self.b_eq,
            bounds=np.column_stack([lb, ub]),
            method="highs",
        )
        if res.status == 0:
            objective = self.obj_sign * res.fun + self.model.objective.constant
            return LpSolution("optimal", res.x, float(objective))
        if res.status == 2:
            return LpSolution("infeasible", None, None)
        if res.status == 3:
            return LpSolution("unbounded", None, None)
        return LpSolution("failed", None, None)


def solve_lp(model: MipModel) -> LpSolution:
    """Solve the LP relaxation of the model (integrality dropped)."""
    prepared = _PreparedLp(model)
    return prepared.solve(prepared.base_lb, prepared.base_ub)


def verify_solution(
    model: MipModel,
    values: np.ndarray,
    feasibility_tol: float = 1e-6,
    integrality_tol: float = 1e-6,
) -> list[str]:
    """Independent incumbent check: violated rows/bounds plus integrality."""
    bad = model.violations(values, tol=feasibility_tol)
    for i, var in enumerate(model.variables):
        if var.kind is VarType.BINARY:
            if min(abs(values[i]), abs(values[i] - 1.0)) > integrality_tol:
                bad.append(f"integrality:{var.name}")
    return bad


@dataclass(order=True)
class _Node:
    key: tuple
    seq: int
    depth: int = field(compare=False)
    bound: float = field(compare=False)
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)


def _relative_gap(incumbent: float | None, bound: float) -> float:
    if incumbent is None or not np.isfinite(bound):
        return np.inf
    diff = abs(incumbent - bound)
    if diff <= 1e-12:
        return 0.0
    if abs(bound) < 1e-12:
        return np.inf
    return diff / abs(bound)


def solve_mip(model: MipModel, config: SolveConfig = SolveConfig()) -> SolveResult:
    """Branch-and-bound over the model's binary variables.

    Deterministic for a fixed (model, config, seed). Status OPTIMAL means the
    run terminated with relative gap <= rel_gap (tree exhaustion gives gap 0).
    """
    t0 = time.monotonic()
    binaries = [
        i for i, v in enumerate(model.variables) if v.kind is VarType.BINARY
    ]
    prepared = _PreparedLp(model)
    maximize = model.objective.sense == "max"

    def better(a: float, b: float) -> bool:
        return a > b if maximize else a < b

    depth_first = (
        config.node_selection is NodeSelection.DEPTH_FIRST
        or config.emphasis is Emphasis.FEASIBILITY
    )

    incumbent_values: np.ndarray | None = None
    incumbent_obj: float | None = None
    time_to_incumbent = 0.0
    nodes_explored = 0
    seq = 0

    def node_key(bound: float, depth: int, seq_id: int) -> tuple:
        if depth_first:
            return (-depth, seq_id)
        return ((-bound if maximize else bound), seq_id)

    root = _Node(
        key=(0.0, 0), seq=0, depth=0, bound=np.inf if maximize else -np.inf,
        lb=prepared.base_lb.copy(), ub=prepared.base_ub.copy(),
    )
    heap: list[_Node] = [root]

    def finish(status: SolveStatus) -> SolveResult:
        elapsed = time.monotonic() - t0
        if incumbent_obj is None:
            bound = best_open_bound()
            return SolveResult(
                status=status, objective=None,
                best_bound=bound, gap=np.inf,
                nodes_explored=nodes_explored,
                time_to_incumbent=0.0, time_total=elapsed,
            )
        bound = best_open_bound()
        return SolveResult(
            status=status,
            objective=incumbent_obj,
            best_bound=bound,
            gap=_relative_gap(incumbent_obj, bound),
            nodes_explored=nodes_explored,
            time_to_incumbent=time_to_incumbent,
            time_total=elapsed,
            incumbent={
                v.name: float(incumbent_values[i])
                for i, v in enumerate(model.variables)
            },
        )

    def best_open_bound() -> float:
        if depth_first:
            bounds = [node.bound for node in heap]
        elif heap:
            bounds = [heap[0].bound]  # heap is keyed by bound in this mode
        else:
            bounds = []
        if incumbent_obj is not None:
            bounds.append(incumbent_obj)
        if not bounds:
            return -np.inf if maximize else np.inf
        return max(bounds) if maximize else min(bounds)

    while heap:
        if config.time_limit is not None and time.monotonic() - t0 > config.time_limit:
            return finish(SolveStatus.TIME_LIMIT)
        if incumbent_obj is not None:
            if _relative_gap(incumbent_obj, best_open_bound()) <= config.rel_gap:
                return finish(SolveStatus.OPTIMAL)
        node = heapq.heappop(heap)
        # bound-based pruning against the incumbent
        if incumbent_obj is not None and not better(node.bound, incumbent_obj):
            continue
        sol = prepared.solve(node.lb, node.ub)
        nodes_explored += 1
        if sol.status == "infeasible":
            continue
        if sol.status == "unbounded":
            return finish(SolveStatus.UNBOUNDED)
        if sol.status == "failed":
            continue  # conservative: treat as pruned, never report bad numbers
        node_bound = sol.objective
        if incumbent_obj is not None and not better(node_bound, incumbent_obj):
            continue

        values = sol.values
        frac = [
            (min(values[i] - np.floor(values[i]), np.ceil(values[i]) - values[i]), i)
            for i in binaries
            if node.lb[i] != node.ub[i]
        ]
        fractional = [(f, i) for f, i in frac if f > config.integrality_tol]
        if not fractional:
            rounded = values.copy()
            for i in binaries:
                rounded[i] = round(rounded[i])
            bad = verify_solution(
                model, rounded, config.feasibility_tol, config.integrality_tol
            )
            if not bad:
                obj = model.objective_value(rounded)
                if incumbent_obj is None or better(obj, incumbent_obj):
                    incumbent_obj = obj
                    incumbent_values = rounded
                    time_to_incumbent = time.monotonic() - t0
                continue
            if not frac:
                continue  # fully fixed yet infeasible at tolerance: prune
            fractional = frac  # re-split on the least integral free binary

        _, branch_var = max(fractional, key=lambda p: (p[0], -p[1]))
        for value in (1.0, 0.0) if values[branch_var] >= 0.5 else (0.0, 1.0):
            seq += 1
            child_lb = node.lb.copy()
            child_ub = node.ub.copy()
            child_lb[branch_var] = child_ub[branch_var] = value
            heapq.heappush(
                heap,
                _Node(
                    key=node_key(node_bound, node.depth + 1, seq),
                    seq=seq,
                    depth=node.depth + 1,
                    bound=node_bound,
                    lb=child_lb,
                    ub=child_ub,
                ),
            )

    if incumbent_obj is None:
        return finish(SolveStatus.INFEASIBLE)
    return finish(SolveStatus.OPTIMAL)
