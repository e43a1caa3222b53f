"""Self-contained bounded-variable tableau simplex.

Second, independent LP implementation used to cross-check the main
relaxation engine on small instances. Dense two-phase tableau with an
explicit artificial phase; Dantzig pricing with a permanent switch to
Bland's rule once degenerate pivots pile up, which guarantees termination.
Built for correctness and determinism at desk scale, not speed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .mip import MipModel, Sense

_AT_LOWER = 0
_AT_UPPER = 1
_FREE = 2
_BASIC = 3

_PIV_TOL = 1e-9
_ZERO_TOL = 1e-11


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray | None  # structural variable values
    objective: float | None


class _Tableau:
    def __init__(self, A, senses, rhs, lb, ub, feas_tol):
        m, n = A.shape
        self.m, self.n_struct = m, n
        self.feas_tol = feas_tol
        slack_lb = np.empty(m)
        slack_ub = np.empty(m)
        for i, sense in enumerate(senses):
            if sense is Sense.LE:
                slack_lb[i], slack_ub[i] = 0.0, np.inf
            elif sense is Sense.GE:
                slack_lb[i], slack_ub[i] = -np.inf, 0.0
            else:
                slack_lb[i] = slack_ub[i] = 0.0
        self.lb = np.concatenate([lb, slack_lb])
        self.ub = np.concatenate([ub, slack_ub])
        self.T = np.hstack([A, np.eye(m)])
        self.rhs = rhs.astype(float).copy()
        total = n + m
        self.status = np.empty(total, dtype=np.int8)
        self.value = np.zeros(total)
        for j in range(total):
            if np.isfinite(self.lb[j]):
                self.status[j], self.value[j] = _AT_LOWER, self.lb[j]
            elif np.isfinite(self.ub[j]):
                self.status[j], self.value[j] = _AT_UPPER, self.ub[j]
            else:
                self.status[j], self.value[j] = _FREE, 0.0
        self.basis = np.empty(m, dtype=int)
        self.n_artificial = 0
        self._install_start_basis()

    def _install_start_basis(self):
        m = self.m
        resid = self.rhs - self.T[:, : self.n_struct + m] @ self.value
        art_cols = []
        art_signs = []
        for i in range(m):
            slack = self.n_struct + i
            v = self.value[slack] + resid[i]
            if self.lb[slack] - self.feas_tol <= v <= self.ub[slack] + self.feas_tol:
                self.basis[i] = slack
                self.status[slack] = _BASIC
                self.value[slack] = min(max(v, self.lb[slack]), self.ub[slack])
            else:
                nearest = self.lb[slack] if v < self.lb[slack] else self.ub[slack]
                self.value[slack] = nearest
                rho = v - nearest
                art_cols.append(i)
                art_signs.append(1.0 if rho > 0 else -1.0)
                self.basis[i] = -1  # placeholder, filled below
        self.n_artificial = len(art_cols)
        if self.n_artificial:
            add = np.zeros((m, self.n_artificial))
            for k, (row, sign) in enumerate(zip(art_cols, art_signs)):
                add[row, k] = sign
            self.T = np.hstack([self.T, add])
            self.lb = np.concatenate([self.lb, np.zeros(self.n_artificial)])
            self.ub = np.concatenate([self.ub, np.full(self.n_artificial, np.inf)])
            self.status = np.concatenate(
                [self.status, np.full(self.n_artificial, _BASIC, dtype=np.int8)]
            )
            art_values = np.zeros(self.n_artificial)
            for k, row in enumerate(art_cols):
                slack = self.n_struct + row
                resid_row = self.rhs[row] - self.T[row, : self.n_struct + m] @ self.value
                art_values[k] = abs(resid_row)
                self.basis[row] = self.n_struct + m + k
                if art_signs[k] < 0:
                    self.T[row, :] = -self.T[row, :]
                    self.rhs[row] = -self.rhs[row]
            self.value = np.concatenate([self.value, art_values])
        self.n_total = self.T.shape[1]

    # -- core iteration ------------------------------------------------

    def _reduced_costs(self, c):
        cb = c[self.basis]
        return c - cb @ self.T

    def optimize(self, c, max_iter, allow_unbounded=True):
        """Maximize c over the current basis; returns an LpStatus."""
        d = self._reduced_costs(c)
        degenerate = 0
        bland_cut = 10 * (self.m + self.n_total)
        eligible_range = self.ub - self.lb > 1e-14
        for _ in range(max_iter):
            nonbasic = self.status != _BASIC
            up = nonbasic & eligible_range & (
                (self.status == _AT_LOWER) | (self.status == _FREE)
            ) & (d > self.feas_tol)
            down = nonbasic & eligible_range & (
                (self.status == _AT_UPPER) | (self.status == _FREE)
            ) & (d < -self.feas_tol)
            candidates = np.flatnonzero(up | down)
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            if degenerate > bland_cut:
                j = int(candidates[0])  # Bland: lowest eligible index
            else:
                j = int(candidates[np.argmax(np.abs(d[candidates]))])
            direction = 1.0 if d[j] > 0 else -1.0
            col = self.T[:, j]
            step = self.ub[j] - self.lb[j]
            leave_row = -1
            delta = direction * col
            basic_vals = self.value[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_lower = np.where(
                    delta > _PIV_TOL, (basic_vals - self.lb[self.basis]) / delta, np.inf
                )
                t_upper = np.where(
                    delta < -_PIV_TOL, (basic_vals - self.ub[self.basis]) / delta, np.inf
                )
            t_rows = np.minimum(np.nan_to_num(t_lower, nan=np.inf),
                                np.nan_to_num(t_upper, nan=np.inf))
            t_rows = np.maximum(t_rows, 0.0)
            best_t = float(np.min(t_rows)) if t_rows.size else np.inf
            if best_t < step:
                near = np.flatnonzero(t_rows <= best_t + _ZERO_TOL)
                leave_row = int(near[np.argmax(np.abs(delta[near]))])
                t = max(0.0, float(t_rows[leave_row]))
            else:
                t = step
            if not np.isfinite(t):
                return LpStatus.UNBOUNDED if allow_unbounded else LpStatus.ITERATION_LIMIT
            if t <= _ZERO_TOL:
                degenerate += 1
            # move
            self.value[self.basis] = basic_vals - t * delta
            self.value[j] = self.value[j] + direction * t
            if leave_row < 0:
                # bound flip
                self.status[j] = _AT_UPPER if direction > 0 else _AT_LOWER
                continue
            leaving = self.basis[leave_row]
            hit_lower = delta[leave_row] > 0
            self.status[leaving] = _AT_LOWER if hit_lower else _AT_UPPER
            self.value[leaving] = self.lb[leaving] if hit_lower else self.ub[leaving]
            self.basis[leave_row] = j
            self.status[j] = _BASIC
            pivot = self.T[leave_row, j]
            self.T[leave_row, :] /= pivot
            colj = self.T[:, j].copy()
            colj[leave_row] = 0.0
            self.T -= np.outer(colj, self.T[leave_row, :])
            unit = np.zeros(self.m)
            unit[leave_row] = 1.0
            self.T[:, j] = unit
            d = d - d[j] * self.T[leave_row, :]
            d[j] = 0.0
        return LpStatus.ITERATION_LIMIT


def solve_tableau(
    c: np.ndarray,
    A: np.ndarray,
    senses: list[Sense],
    rhs: np.ndarray,
    lb: np.ndarray,
    ub: np.ndarray,
    maximize: bool = True,
    feasibility_tol: float = 1e-7,
    max_iter: int | None = None,
) -> LpResult:
    """Solve max/min c.x s.t. A x (sense) rhs, lb <= x <= ub."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    if max_iter is None:
        max_iter = 2000 + 60 * (m + n)
    tab = _Tableau(A, senses, np.asarray(rhs, dtype=float),
                   np.asarray(lb, dtype=float), np.asarray(ub, dtype=float),
                   feasibility_tol)
    c_full = np.zeros(tab.n_total)
    c_full[:n] = c if maximize else -np.asarray(c)

    if tab.n_artificial:
        phase1 = np.zeros(tab.n_total)
        phase1[n + m :] = -1.0
        status = tab.optimize(phase1, max_iter, allow_unbounded=False)
        if status is LpStatus.ITERATION_LIMIT:
            return LpResult(status, None, None)
        if tab.value[n + m :].sum() > feasibility_tol * max(1.0, abs(rhs).max()):
            return LpResult(LpStatus.INFEASIBLE, None, None)
        tab.ub[n + m :] = 0.0  # pin artificials at zero for phase 2

    status = tab.optimize(c_full, max_iter)
    if status in (LpStatus.ITERATION_LIMIT, LpStatus.UNBOUNDED):
        return LpResult(status, None, None)
    x = tab.value[:n].copy()
    obj = float(np.dot(c, x))
    return LpResult(LpStatus.OPTIMAL, x, obj)


def solve_model_tableau(model: MipModel, feasibility_tol: float = 1e-7) -> LpResult:
    """Tableau solve of a MipModel's LP relaxation (integrality dropped)."""
    n = len(model.variables)
    m = len(model.constraints)
    A = np.zeros((m, n))
    rhs = np.empty(m)
    senses = []
    for i, con in enumerate(model.constraints):
        for var, coef in con.coeffs.items():
            A[i, var] = coef
        rhs[i] = con.rhs
        senses.append(con.sense)
    lb = np.array([v.lower for v in model.variables])
    ub = np.array([v.upper for v in model.variables])
    c = np.zeros(n)
    for var, coef in model.objective.coeffs.items():
        c[var] = coef
    result = solve_tableau(
        c, A, senses, rhs, lb, ub,
        maximize=model.objective.sense == "max",
        feasibility_tol=feasibility_tol,
    )
    if result.status is LpStatus.OPTIMAL:
        result = LpResult(
            result.status, result.x, result.objective + model.objective.constant
        )
    return result
