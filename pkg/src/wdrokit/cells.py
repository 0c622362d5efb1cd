"""Polyhedral machinery for ReLU activation cells: halfspace construction,
feasibility inside the domain box, recession cones, and exact linear
maximization over cone-intersect-unit-ball (the certificate inner problem).

Strict inequalities (open cells, cone interiors) are realized with a fixed
margin ``STRICT_MARGIN`` scaled by the row norm; by positive homogeneity the
optimal value is unaffected whenever the interior is nonempty.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ShapeMismatch
from .linalg import NormKind, dual_norm_maximizer, vec_norm
from .lp import EQUAL, GREATER, LESS, OPTIMAL, LpProblem, solve_lp  # noqa: F401

STRICT_MARGIN = 1e-9
_DYKSTRA_MAX_SWEEPS = 10_000
_DYKSTRA_TOL = 1e-10
_ZERO_TOL = 1e-12


class RecessionCone:
    """The cone {u : g_i . u >= 0 for all rows g_i} (halfspace offsets dropped)."""

    def __init__(self, normals: np.ndarray):
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        if normals.size == 0:
            normals = normals.reshape(0, normals.shape[-1] if normals.ndim == 2 else 0)
        self.normals = normals

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def n_rows(self) -> int:
        return self.normals.shape[0]

    def contains(self, u, tol: float = 1e-9) -> bool:
        u = np.asarray(u, dtype=float)
        if self.n_rows == 0:
            return True
        return bool(np.all(self.normals @ u >= -tol))

    @cached_property
    def is_origin_only(self) -> bool:
        """True when the cone contains no nonzero direction."""
        if self.n_rows == 0:
            return False
        for j in range(self.dim):
            for sign in (1.0, -1.0):
                c = np.zeros(self.dim)
                c[j] = sign
                sol = _solve_cone_box_lp(c, self.normals, np.zeros(self.n_rows))
                if sol.status == OPTIMAL and sol.value > 1e-7:
                    return False
        return True


@dataclass(frozen=True)
class CellPolyhedron:
    """Open cell {x : signs_i * (A_i . x + b_i) > 0}, one row per hidden unit,
    with the affine logit map theta(x) = jac @ x + offset valid on the cell."""

    a: np.ndarray        # (units, n) halfspace normals
    b: np.ndarray        # (units,) offsets
    signs: np.ndarray    # (units,) entries +1/-1
    mask: tuple
    jac: np.ndarray      # (K, n)
    offset: np.ndarray   # (K,)

    def halfspace_values(self, x) -> np.ndarray:
        """signs * (A x + b); positive entries mean x satisfies the open cell."""
        return self.signs * (self.a @ np.asarray(x, dtype=float) + self.b)

    def contains(self, x, tol: float = 0.0) -> bool:
        if self.a.shape[0] == 0:
            return True
        return bool(np.all(self.halfspace_values(x) > tol))

    def recession_cone(self) -> RecessionCone:
        return RecessionCone(self.signs[:, None] * self.a)


def build_cell(net, mask) -> CellPolyhedron:
    """Halfspace description of the cell of ``mask`` plus its affine logit map.

    Masked pre-activations are affine: A_1 = W_1, b_1 = beta_1 and
    A_{h+1} = W_{h+1} D_h A_h, b_{h+1} = W_{h+1} D_h b_h + beta_{h+1}; unit
    (h, j) contributes a + halfspace when active and a - one when inactive.
    """
    from .network import ActivationKind, masked_jacobian  # local: avoid cycle

    if net.activation is not ActivationKind.RELU:
        raise ShapeMismatch("cells are defined for ReLU networks only")
    if len(mask) != net.n_hidden:
        raise ShapeMismatch(
            f"mask has {len(mask)} layers, network has {net.n_hidden} hidden layers"
        )
    rows_a, rows_b, rows_sign = [], [], []
    a_hat = None
    b_hat = None
    for (w, bias), diag in zip(net.layers[:-1], mask):
        d = np.asarray(diag, dtype=float)
        if d.size != w.shape[0]:
            raise ShapeMismatch("mask width does not match layer width")
        if a_hat is None:
            a_hat, b_hat = w.copy(), bias.copy()
        else:
            a_hat = w @ a_hat
            b_hat = w @ b_hat + bias
        rows_a.append(a_hat)
        rows_b.append(b_hat)
        rows_sign.append(np.where(d > 0.0, 1.0, -1.0))
        # Mask for the next affine recursion step.
        a_hat = d[:, None] * a_hat
        b_hat = d * b_hat

    w_last, bias_last = net.layers[-1]
    if a_hat is None:
        jac = w_last.copy()
        offset = bias_last.copy()
        a = np.zeros((0, net.input_dim))
        b = np.zeros(0)
        signs = np.zeros(0)
    else:
        jac = w_last @ a_hat
        offset = w_last @ b_hat + bias_last
        a = np.vstack(rows_a)
        b = np.concatenate(rows_b)
        signs = np.concatenate(rows_sign)
    assert np.allclose(jac, masked_jacobian(net, mask))
    return CellPolyhedron(a, b, signs, tuple(mask), jac, offset)


def cell_interior_point(cell: CellPolyhedron, lo, hi,
                        margin: float = STRICT_MARGIN) -> np.ndarray | None:
    """A box point satisfying every halfspace with slack >= margin, or None.

    Solves max t subject to signs*(Ax+b) >= t, lo <= x <= hi, t <= 1 and
    keeps the maximum-slack solution, so returned witnesses sit well inside
    the cell whenever the cell has volume.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    # Variables (x, t), maximize t.
    c = np.zeros(n + 1)
    c[n] = 1.0
    problem = LpProblem(c)
    for i in range(cell.a.shape[0]):
        row = np.concatenate([cell.signs[i] * cell.a[i], [-1.0]])
        problem.add(row, GREATER, -cell.signs[i] * cell.b[i])
    for j in range(n):
        e = np.zeros(n + 1)
        e[j] = 1.0
        problem.add(e, LESS, hi[j])
        problem.add(e, GREATER, lo[j])
    t_cap = np.zeros(n + 1)
    t_cap[n] = 1.0
    problem.add(t_cap, LESS, 1.0)
    sol = solve_lp(problem)
    if sol.status != OPTIMAL or sol.value < margin:
        return None
    return sol.x[:n]


def cell_feasible(cell: CellPolyhedron, lo, hi, margin: float = STRICT_MARGIN) -> bool:
    """True iff some box point satisfies every halfspace with slack >= margin."""
    return cell_interior_point(cell, lo, hi, margin) is not None


@dataclass
class ConeBallResult:
    """Outcome of maximizing a linear form over cone-intersect-unit-r-ball.

    ``feasible`` is False (value -inf) when the cone admits no nonzero
    direction, or the requested interior is empty.  ``all_descent`` flags the
    branch where every cone direction has nonpositive objective, in which
    case the ball optimum 0 (at u = 0) is reported.
    """

    value: float
    u: np.ndarray | None
    feasible: bool
    all_descent: bool


def _solve_cone_box_lp(c: np.ndarray, normals: np.ndarray, margins: np.ndarray):
    """max c.u subject to normals @ u >= margins and ||u||_inf <= 1."""
    n = c.size
    problem = LpProblem(c)
    for g, m in zip(normals, margins):
        problem.add(g, GREATER, m)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        problem.add(e, LESS, 1.0)
        problem.add(e, GREATER, -1.0)
    return solve_lp(problem)


def _solve_cone_l1_lp(c: np.ndarray, normals: np.ndarray, margins: np.ndarray):
    """max c.u over the cone and the L1 unit ball via the split u = p - q."""
    n = c.size
    obj = np.concatenate([c, -c])
    problem = LpProblem(obj)
    for g, m in zip(normals, margins):
        problem.add(np.concatenate([g, -g]), GREATER, m)
    problem.add(np.ones(2 * n), LESS, 1.0)
    for j in range(2 * n):
        e = np.zeros(2 * n)
        e[j] = 1.0
        problem.add(e, GREATER, 0.0)
    sol = solve_lp(problem)
    if sol.status != OPTIMAL:
        return sol, None
    return sol, sol.x[:n] - sol.x[n:]


def _cone_has_interior(normals: np.ndarray, row_norms: np.ndarray) -> bool:
    """Whether some unit-box direction clears every row with positive margin.

    Maximizes the uniform margin t in normals @ u >= t * row_norms over the
    unit box; by homogeneity the interior is nonempty iff the optimum is
    positive, which a fixed tiny margin probe cannot resolve at LP tolerance.
    """
    n = normals.shape[1]
    c = np.zeros(n + 1)
    c[n] = 1.0
    problem = LpProblem(c)
    for g, rn in zip(normals, row_norms):
        problem.add(np.concatenate([g, [-rn]]), GREATER, 0.0)
    for j in range(n):
        e = np.zeros(n + 1)
        e[j] = 1.0
        problem.add(e, LESS, 1.0)
        problem.add(e, GREATER, -1.0)
    cap = np.zeros(n + 1)
    cap[n] = 1.0
    problem.add(cap, LESS, 1.0)
    sol = solve_lp(problem)
    return sol.status == OPTIMAL and sol.value > 1e-7


def dykstra_project_cone(point, normals: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {u : normals @ u >= 0} by cyclic Dykstra."""
    x = np.asarray(point, dtype=float).copy()
    rows = [g for g in np.atleast_2d(normals) if vec_norm(g, NormKind.L2) > _ZERO_TOL]
    if not rows:
        return x
    sq_norms = [float(g @ g) for g in rows]
    corrections = [np.zeros_like(x) for _ in rows]
    for _ in range(_DYKSTRA_MAX_SWEEPS):
        x_prev = x.copy()
        for i, g in enumerate(rows):
            z = x + corrections[i]
            violation = float(g @ z)
            if violation < 0.0:
                projected = z - (violation / sq_norms[i]) * g
            else:
                projected = z
            corrections[i] = z - projected
            x = projected
        if np.max(np.abs(x - x_prev)) <= _DYKSTRA_TOL:
            break
    return x


def max_linear_over_cone_ball(c, cone: RecessionCone, r: NormKind,
                              interior: bool = False) -> ConeBallResult:
    """Maximize c . u over {u in cone, ||u||_r <= 1}.

    r in {L1, LInf} solve an exact LP (the ball is a polytope); r = L2 uses
    the Moreau identity value = ||Proj_cone(c)||_2 with a Dykstra projection.
    With ``interior`` the cone rows must hold with margin STRICT_MARGIN times
    the row norm; an empty interior yields the -inf sentinel.
    """
    c = np.asarray(c, dtype=float)
    normals = cone.normals if cone.n_rows else np.zeros((0, c.size))
    live = np.array([vec_norm(g, NormKind.L2) > _ZERO_TOL for g in normals], dtype=bool)
    normals = normals[live] if normals.shape[0] else normals
    row_norms = np.array([vec_norm(g, NormKind.L2) for g in normals])
    margins = STRICT_MARGIN * row_norms if interior else np.zeros(len(normals))

    if len(normals) == 0:
        u = dual_norm_maximizer(c, r)
        return ConeBallResult(float(c @ u), u, True, False)

    if interior:
        if not _cone_has_interior(normals, row_norms):
            return ConeBallResult(-np.inf, None, False, False)
    elif cone.is_origin_only:
        return ConeBallResult(-np.inf, None, False, False)

    if r is NormKind.LINF:
        sol = _solve_cone_box_lp(c, normals, margins)
        if sol.status != OPTIMAL:
            return ConeBallResult(-np.inf, None, False, False)
        u, value = sol.x, sol.value
    elif r is NormKind.L1:
        sol, u = _solve_cone_l1_lp(c, normals, margins)
        if u is None:
            return ConeBallResult(-np.inf, None, False, False)
        value = sol.value
    else:
        projected = dykstra_project_cone(c, normals)
        norm = vec_norm(projected, NormKind.L2)
        if norm <= _ZERO_TOL:
            return ConeBallResult(0.0, np.zeros(c.size), True, bool(np.any(c)))
        u = projected / norm
        value = norm

    all_descent = bool(np.any(c)) and value <= 1e-12
    return ConeBallResult(float(value), u, True, all_descent)
