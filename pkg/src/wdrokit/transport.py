"""Transport-cost accounting for the discrete distributions the toolkit
builds: canonical-coupling cost and a small exact discrete Wasserstein-1
solver used for cross-validation.

The ground cost is ||x' - x||_r plus an infinite term for label changes, so
all solves happen per label group; a label-mass mismatch makes the distance
infinite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LabelMassMismatch
from .linalg import NormKind, vec_norm
from .lp import EQUAL, GREATER, MAX_VARIABLES, OPTIMAL, LpProblem, solve_lp

_WEIGHT_TOL = 1e-12
_MASS_TOL = 1e-9
MAX_ATOMS = 64


@dataclass(frozen=True)
class DiscreteDist:
    """A finitely supported labeled distribution."""

    points: np.ndarray   # (m, n)
    labels: np.ndarray   # (m,) integer classes
    weights: np.ndarray  # (m,) nonnegative, summing to one

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        labels = np.asarray(self.labels, dtype=int)
        weights = np.asarray(self.weights, dtype=float)
        if not (points.shape[0] == labels.size == weights.size):
            raise ValueError("points, labels and weights must have equal length")
        if np.any(weights < -_WEIGHT_TOL):
            raise ValueError("weights must be nonnegative")
        if abs(float(weights.sum()) - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum()}, expected 1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", weights)

    @property
    def n_atoms(self) -> int:
        return self.points.shape[0]

    def drop_zero_atoms(self, tol: float = _WEIGHT_TOL) -> "DiscreteDist":
        keep = self.weights > tol
        w = self.weights[keep]
        return DiscreteDist(self.points[keep], self.labels[keep], w / w.sum())


def canonical_cost(dist, r: NormKind) -> float:
    """Cost of the coupling that pairs each moved atom with its anchor.

    ``dist`` must expose ``canonical_pairs()`` yielding tuples
    (anchor_x, moved_x, mass, anchor_label, moved_label); attack and
    worst-case distributions both do.  The result upper-bounds the exact
    label-aware Wasserstein-1 distance to the anchor distribution.
    """
    total = 0.0
    for anchor, moved, mass, lab_a, lab_m in dist.canonical_pairs():
        if lab_a != lab_m:
            raise LabelMassMismatch("canonical coupling moves mass across labels")
        total += mass * vec_norm(np.asarray(moved) - np.asarray(anchor), r)
    return total


def _transport_lp(cost: np.ndarray, p_w: np.ndarray, q_w: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact min-cost transport between two weight vectors; returns (cost, plan)."""
    m, n = cost.shape
    n_vars = m * n
    if n_vars <= MAX_VARIABLES:
        problem = LpProblem(-cost.ravel())
        for i in range(m):
            row = np.zeros(n_vars)
            row[i * n:(i + 1) * n] = 1.0
            problem.add(row, EQUAL, p_w[i])
        # Last column constraint is redundant given the row sums.
        for j in range(n - 1):
            col = np.zeros(n_vars)
            col[j::n] = 1.0
            problem.add(col, EQUAL, q_w[j])
        for v in range(n_vars):
            e = np.zeros(n_vars)
            e[v] = 1.0
            problem.add(e, GREATER, 0.0)
        sol = solve_lp(problem)
        if sol.status != OPTIMAL:
            raise LabelMassMismatch("transportation polytope is empty; mass mismatch")
        plan = np.maximum(sol.x, 0.0).reshape(m, n)
        return float(np.sum(cost * plan)), plan
    # Larger instances go through scipy's HiGHS solver behind the same contract.
    from scipy.optimize import linprog

    a_eq = np.zeros((m + n - 1, n_vars))
    b_eq = np.zeros(m + n - 1)
    for i in range(m):
        a_eq[i, i * n:(i + 1) * n] = 1.0
        b_eq[i] = p_w[i]
    for j in range(n - 1):
        a_eq[m + j, j::n] = 1.0
        b_eq[m + j] = q_w[j]
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise LabelMassMismatch("transportation polytope is empty; mass mismatch")
    plan = res.x.reshape(m, n)
    return float(np.sum(cost * plan)), plan


def exact_w1_coupling(p: DiscreteDist, q: DiscreteDist, r: NormKind
                      ) -> tuple[float, list[tuple[int, int, float]]]:
    """Exact label-aware W1 plus an optimal coupling as (i, j, mass) flows.

    Returns (inf, []) when any label's masses mismatch (transport would have
    to relabel, which costs infinity).
    """
    if p.n_atoms > MAX_ATOMS or q.n_atoms > MAX_ATOMS:
        raise ValueError(f"exact solver is capped at {MAX_ATOMS} atoms per side")
    total = 0.0
    flows: list[tuple[int, int, float]] = []
    labels = sorted(set(p.labels.tolist()) | set(q.labels.tolist()))
    for label in labels:
        pi = np.nonzero(p.labels == label)[0]
        qi = np.nonzero(q.labels == label)[0]
        p_mass = float(p.weights[pi].sum())
        q_mass = float(q.weights[qi].sum())
        if abs(p_mass - q_mass) > _MASS_TOL:
            return np.inf, []
        if p_mass <= _WEIGHT_TOL:
            continue
        cost = np.zeros((pi.size, qi.size))
        for a, i in enumerate(pi):
            for b, j in enumerate(qi):
                cost[a, b] = vec_norm(p.points[i] - q.points[j], r)
        value, plan = _transport_lp(cost, p.weights[pi], q.weights[qi])
        total += value
        for a, i in enumerate(pi):
            for b, j in enumerate(qi):
                if plan[a, b] > _WEIGHT_TOL:
                    flows.append((int(i), int(j), float(plan[a, b])))
    return total, flows


def exact_w1_small(p: DiscreteDist, q: DiscreteDist, r: NormKind) -> float:
    """Exact Wasserstein-1 under the label-preserving ground cost."""
    value, _ = exact_w1_coupling(p, q, r)
    return value
