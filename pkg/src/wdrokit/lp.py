"""A small dense LP solver: two-phase simplex with Bland's rule.

Problems are stated with free variables and mixed <=, >=, = rows; the solver
converts to standard form internally (variable splitting plus slack/surplus
and artificial columns).  Bland's rule guarantees termination, which matters
because the polyhedral-cell subproblems are frequently degenerate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LpError
from .linalg import as_vec

MAX_VARIABLES = 200
_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-7
_MAX_PIVOTS = 200_000

LESS = "<="
GREATER = ">="
EQUAL = "="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LpProblem:
    """Maximize objective . x subject to rows (a, rel, b); variables are free."""

    objective: np.ndarray
    rows: list[tuple[np.ndarray, str, float]] = field(default_factory=list)

    def __post_init__(self):
        self.objective = as_vec(self.objective)
        if self.objective.size > MAX_VARIABLES:
            raise LpError(f"problem has {self.objective.size} variables; cap is {MAX_VARIABLES}")
        checked = []
        for a, rel, b in self.rows:
            a = as_vec(a)
            if a.size != self.objective.size:
                raise LpError("constraint row length does not match the objective")
            if rel not in (LESS, GREATER, EQUAL):
                raise LpError(f"unknown relation {rel!r}")
            checked.append((a, rel, float(b)))
        self.rows = checked

    def add(self, a, rel: str, b: float) -> None:
        a = as_vec(a)
        if a.size != self.objective.size:
            raise LpError("constraint row length does not match the objective")
        if rel not in (LESS, GREATER, EQUAL):
            raise LpError(f"unknown relation {rel!r}")
        self.rows.append((a, rel, float(b)))


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None
    value: float


def _bland_simplex(tableau: np.ndarray, basis: list[int], cost: np.ndarray) -> str:
    """Minimize cost over the tableau in place; basis columns start as identity."""
    m, n1 = tableau.shape
    n = n1 - 1
    for _ in range(_MAX_PIVOTS):
        reduced = cost - cost[basis] @ tableau[:, :n]
        entering = np.nonzero(reduced < -_PIVOT_TOL)[0]
        if entering.size == 0:
            return OPTIMAL
        j = int(entering[0])  # Bland: lowest eligible index enters
        col = tableau[:, j]
        positive = col > _PIVOT_TOL
        if not positive.any():
            return UNBOUNDED
        ratios = np.full(m, np.inf)
        ratios[positive] = tableau[positive, n] / col[positive]
        best = ratios.min()
        tied = np.nonzero(ratios <= best + 1e-12)[0]
        i = int(tied[np.argmin([basis[t] for t in tied])])  # lowest index leaves
        pivot = tableau[i, j]
        tableau[i] /= pivot
        for r in range(m):
            if r != i and tableau[r, j] != 0.0:
                tableau[r] -= tableau[r, j] * tableau[i]
        basis[i] = j
    raise LpError("simplex exceeded the pivot cap; this should not happen with Bland's rule")


def solve_lp(problem: LpProblem) -> LpSolution:
    """Solve a dense LP; returns an optimal basic solution or a status."""
    n = problem.objective.size
    m = len(problem.rows)
    if m == 0:
        # No constraints: bounded only if the objective is zero.
        if np.any(problem.objective):
            return LpSolution(UNBOUNDED, None, np.inf)
        return LpSolution(OPTIMAL, np.zeros(n), 0.0)

    # Standard form: x = xp - xn with xp, xn >= 0, one slack/surplus per
    # inequality, artificials where no natural basis column exists.
    n_split = 2 * n
    n_slack = sum(1 for _, rel, _ in problem.rows if rel != EQUAL)
    a = np.zeros((m, n_split + n_slack))
    b = np.zeros(m)
    slack_idx = 0
    needs_artificial = []
    for i, (row, rel, rhs) in enumerate(problem.rows):
        coeff = np.concatenate([row, -row])
        if rhs < 0.0:
            coeff = -coeff
            rhs = -rhs
            rel = {LESS: GREATER, GREATER: LESS, EQUAL: EQUAL}[rel]
        a[i, :n_split] = coeff
        b[i] = rhs
        if rel == EQUAL:
            needs_artificial.append(i)
        else:
            a[i, n_split + slack_idx] = 1.0 if rel == LESS else -1.0
            if rel == GREATER:
                needs_artificial.append(i)
            slack_idx += 1

    n_struct = n_split + n_slack
    basis: list[int] = [-1] * m
    for i in range(m):
        if i not in needs_artificial:
            j = int(np.nonzero(a[i, n_split:])[0][0]) + n_split
            basis[i] = j
    n_art = len(needs_artificial)
    art = np.zeros((m, n_art))
    for t, i in enumerate(needs_artificial):
        art[i, t] = 1.0
        basis[i] = n_struct + t

    tableau = np.hstack([a, art, b[:, None]])

    # Phase 1: drive artificials to zero.
    if n_art:
        cost1 = np.zeros(n_struct + n_art)
        cost1[n_struct:] = 1.0
        # Make basis columns canonical for phase 1.
        for i, j in enumerate(basis):
            if tableau[i, j] != 1.0:
                tableau[i] /= tableau[i, j]
        status = _bland_simplex(tableau, basis, cost1)
        if status != OPTIMAL:
            raise LpError("phase-1 simplex reported unbounded; artificial costs are bounded below")
        phase1_value = float(cost1[basis] @ tableau[:, -1])
        if phase1_value > _FEAS_TOL:
            return LpSolution(INFEASIBLE, None, -np.inf)
        # Pivot remaining artificials out of the basis where possible.
        for i in range(m):
            if basis[i] >= n_struct:
                nz = np.nonzero(np.abs(tableau[i, :n_struct]) > _PIVOT_TOL)[0]
                if nz.size:
                    j = int(nz[0])
                    pivot = tableau[i, j]
                    tableau[i] /= pivot
                    for r in range(m):
                        if r != i and tableau[r, j] != 0.0:
                            tableau[r] -= tableau[r, j] * tableau[i]
                    basis[i] = j
        keep = [i for i in range(m) if basis[i] < n_struct]
        tableau = np.hstack([tableau[keep, :n_struct], tableau[keep, -1:]])
        basis = [basis[i] for i in keep]
    # else: tableau already has only structural columns plus rhs.

    # Phase 2: minimize the negated objective over structural variables.
    cost2 = np.zeros(n_struct)
    cost2[:n] = -problem.objective
    cost2[n:n_split] = problem.objective
    status = _bland_simplex(tableau, basis, cost2)
    if status == UNBOUNDED:
        return LpSolution(UNBOUNDED, None, np.inf)

    full = np.zeros(n_struct)
    for i, j in enumerate(basis):
        full[j] = tableau[i, -1]
    x = full[:n] - full[n:n_split]
    return LpSolution(OPTIMAL, x, float(problem.objective @ x))
