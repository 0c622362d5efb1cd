"""WDRO certificate sandwich for small classifiers.

Upper bound: 2^{1/s} times the largest masked-Jacobian operator norm over a
mask inventory.  Lower bounds: exact linear maximization over recession cones
of reachable cells (all reachable masks, or dataset masks only for the
practical variant).  Also: the tightness condition under which the bounds
match, the constructive worst-case distribution realizing the lower bound,
and heuristic estimates for smooth-activation networks.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .cells import (CellPolyhedron, RecessionCone, build_cell, cell_feasible,
                    cell_interior_point, dykstra_project_cone,
                    max_linear_over_cone_ball)
from .errors import (AllDegenerate, CellEscape, EmptyInventory, NoRootSample,
                     WrongActivation)
from .linalg import NormKind, dual_norm_maximizer, op_norm, vec_norm
from .losses import LossKind, loss, sensitivity_factor
from .network import (ActivationKind, LabeledSample, Mask, Mlp, forward,
                      jacobian, mask_at, masked_jacobian)

log = logging.getLogger(__name__)

PROVENANCE_DATASET = "dataset"
PROVENANCE_PROBE = "probe"
PROVENANCE_EXHAUSTIVE = "exhaustive"

DEFAULT_ALPHA_SCHEDULE = tuple(10.0 ** e for e in range(2, 9))


@dataclass(frozen=True)
class MaskInventory:
    """Feasible activation masks with per-mask provenance.

    ``exhaustive`` is True only when the inventory provably contains every
    reachable mask (full 2^units enumeration filtered by cell feasibility).
    """

    masks: tuple[Mask, ...]
    provenance: dict[Mask, str]
    exhaustive: bool

    def __len__(self) -> int:
        return len(self.masks)


def enumerate_masks(net: Mlp, data: list[LabeledSample], probes: int = 0,
                    exhaustive_cap: int = 0, seed: int = 0) -> MaskInventory:
    """Collect masks from dataset points, random box probes, and (when the
    unit count permits) exhaustive enumeration filtered by cell feasibility.

    Masks are kept in first-seen order: dataset, then probes, then the
    exhaustive sweep; duplicates collapse to their earliest provenance.
    """
    if net.activation is not ActivationKind.RELU:
        raise WrongActivation("mask inventories are defined for ReLU networks")
    masks: list[Mask] = []
    provenance: dict[Mask, str] = {}

    def _add(mask: Mask, source: str) -> None:
        if mask not in provenance:
            provenance[mask] = source
            masks.append(mask)

    for sample in data:
        mask, degenerate = mask_at(net, sample.x)
        if degenerate:
            log.warning("skipping degenerate dataset point %s", sample.x)
            continue
        _add(mask, PROVENANCE_DATASET)

    if probes > 0:
        rng = np.random.default_rng(seed)
        lo, hi = net.box_lo, net.box_hi
        for _ in range(probes):
            x = lo + rng.random(net.input_dim) * (hi - lo)
            mask, degenerate = mask_at(net, x)
            if not degenerate:
                _add(mask, PROVENANCE_PROBE)

    total_units = sum(net.hidden_widths)
    exhaustive = 0 < total_units <= exhaustive_cap or (total_units == 0 and exhaustive_cap >= 0)
    if exhaustive and total_units > 0:
        widths = net.hidden_widths
        for bits in itertools.product((1, 0), repeat=total_units):
            mask: Mask = ()
            pos = 0
            for w in widths:
                mask += (bits[pos:pos + w],)
                pos += w
            if mask in provenance:
                continue
            if cell_feasible(build_cell(net, mask), net.box_lo, net.box_hi):
                _add(mask, PROVENANCE_EXHAUSTIVE)
    if total_units == 0:
        _add((), PROVENANCE_EXHAUSTIVE)
        exhaustive = True
    return MaskInventory(tuple(masks), provenance, exhaustive)


def mask_id(mask: Mask) -> str:
    return "|".join("".join(str(b) for b in layer) for layer in mask) or "-"


@dataclass
class UpperBoundResult:
    value: float
    best_mask: Mask | None
    per_mask: dict[Mask, float]
    factor: float
    exhaustive: bool


def upper_bound_L(net: Mlp, inv: MaskInventory, r: NormKind, s: NormKind) -> UpperBoundResult:
    """2^{1/r} * max over the inventory of ||J_D||_{r->s}.

    The prefactor is ||e_{k'} - e_k||_r, the r-norm of a class-pair direction;
    it bounds the loss increment via Hoelder against the s-norm logit change.
    A certified upper bound only when the inventory is exhaustive; otherwise
    it is an estimate (the report carries the flag).
    """
    if len(inv) == 0:
        raise EmptyInventory("upper bound needs a nonempty mask inventory")
    factor = sensitivity_factor(r)
    per_mask: dict[Mask, float] = {}
    best_mask = None
    best = -np.inf
    for mask in inv.masks:
        value = op_norm(masked_jacobian(net, mask), r, s)
        per_mask[mask] = value
        if value > best:
            best, best_mask = value, mask
    return UpperBoundResult(factor * best, best_mask, per_mask, factor, inv.exhaustive)


@dataclass
class LowerBoundWitness:
    """The maximizing (mask, rival pair, direction) of a lower bound, plus a
    point inside the corresponding cell from which worst-case rays launch."""

    mask: Mask
    cell: CellPolyhedron
    k_rival: int
    k_true: int
    u: np.ndarray
    x_interior: np.ndarray
    root_index: int | None = None


@dataclass
class LowerBoundResult:
    value: float
    witness: LowerBoundWitness | None
    per_mask: dict[Mask, tuple[float, tuple[int, int] | None]] = field(default_factory=dict)


def _pair_direction(jac: np.ndarray, k_rival: int, k_true: int) -> np.ndarray:
    return jac[k_rival] - jac[k_true]


def lower_bound_l(net: Mlp, inv: MaskInventory, r: NormKind) -> LowerBoundResult:
    """max over inventory masks and ordered class pairs of the cone-ball value
    for the logit-difference direction J_D^T (e_{k'} - e_k)."""
    if len(inv) == 0:
        raise EmptyInventory("lower bound needs a nonempty mask inventory")
    k_count = net.output_dim
    best = -np.inf
    witness = None
    per_mask: dict[Mask, tuple[float, tuple[int, int] | None]] = {}
    for mask in inv.masks:
        cell = build_cell(net, mask)
        cone = cell.recession_cone()
        mask_best = -np.inf
        mask_pair = None
        mask_u = None
        for k_rival in range(k_count):
            for k_true in range(k_count):
                if k_rival == k_true:
                    continue
                res = max_linear_over_cone_ball(
                    _pair_direction(cell.jac, k_rival, k_true), cone, r, interior=False)
                if res.feasible and res.value > mask_best:
                    mask_best = res.value
                    mask_pair = (k_rival, k_true)
                    mask_u = res.u
        per_mask[mask] = (mask_best, mask_pair)
        if mask_pair is not None and mask_best > best:
            x_int = cell_interior_point(cell, net.box_lo, net.box_hi)
            if x_int is None:
                continue  # mask in inventory but cell empty within the box
            best = mask_best
            witness = LowerBoundWitness(mask, cell, mask_pair[0], mask_pair[1],
                                        mask_u, x_int)
    return LowerBoundResult(best, witness, per_mask)


def practical_lower_bound_lN(net: Mlp, data: list[LabeledSample],
                             r: NormKind) -> LowerBoundResult:
    """Dataset-restricted lower bound: masks of the sample points only,
    rival directions against each sample's true class, interior cones."""
    if not data:
        raise EmptyInventory("practical lower bound needs a nonempty dataset")
    best = -np.inf
    witness = None
    cache: dict[tuple[Mask, int, int], object] = {}
    cells: dict[Mask, CellPolyhedron] = {}
    usable = 0
    for index, sample in enumerate(data):
        mask, degenerate = mask_at(net, sample.x)
        if degenerate:
            log.warning("skipping degenerate sample %d", index)
            continue
        usable += 1
        if mask not in cells:
            cells[mask] = build_cell(net, mask)
        cell = cells[mask]
        cone = cell.recession_cone()
        for k_rival in range(net.output_dim):
            if k_rival == sample.y:
                continue
            key = (mask, k_rival, sample.y)
            if key not in cache:
                cache[key] = max_linear_over_cone_ball(
                    _pair_direction(cell.jac, k_rival, sample.y), cone, r,
                    interior=True)
            res = cache[key]
            if res.feasible and res.value > best:
                best = res.value
                witness = LowerBoundWitness(mask, cell, k_rival, sample.y,
                                            res.u, sample.x.copy(), root_index=index)
    if usable == 0:
        raise AllDegenerate("every dataset point sits on a cell boundary")
    return LowerBoundResult(best, witness)


def check_tightness(net: Mlp, inv: MaskInventory, r: NormKind, s: NormKind,
                    upper: UpperBoundResult | None = None,
                    lower: LowerBoundResult | None = None,
                    tol: float = 1e-9) -> bool:
    """Sufficient condition for the bounds to coincide.

    True iff the dual-norm maximizer of J_{D*}^T (e_{k'*} - e_{k*}) lies in
    the recession cone of the upper bound's maximizing cell AND that class
    pair realizes the full sensitivity-scaled operator norm of J_{D*}.
    When true, the equality |l - L| <= 1e-6 max(1, L) is asserted.
    """
    upper = upper or upper_bound_L(net, inv, r, s)
    lower = lower or lower_bound_l(net, inv, r)
    if upper.best_mask is None or lower.witness is None:
        return False
    jac_star = masked_jacobian(net, upper.best_mask)
    k_rival, k_true = lower.witness.k_rival, lower.witness.k_true
    g = _pair_direction(jac_star, k_rival, k_true)
    xi = dual_norm_maximizer(g, r)
    cone = build_cell(net, upper.best_mask).recession_cone()
    if not cone.contains(xi, tol=tol):
        return False
    g_norm = vec_norm(g, s)
    pair_max = max(
        vec_norm(_pair_direction(jac_star, i, j), s)
        for i in range(net.output_dim) for j in range(net.output_dim) if i != j
    )
    scale = max(1.0, abs(upper.value))
    if g_norm < pair_max - tol * scale:
        return False
    if abs(g_norm - upper.value) > tol * scale:
        return False
    assert abs(lower.value - upper.value) <= 1e-6 * max(1.0, upper.value), (
        f"tightness condition held but l={lower.value} != L={upper.value}")
    return True


@dataclass
class WorstCaseDistribution:
    """The constructed near-worst-case mixture: the empirical atoms with the
    root's mass partially moved to a far point along a recession-cone ray."""

    points: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    eta: float
    alpha: float
    root_index: int
    x_tilde: np.ndarray
    x_star: np.ndarray
    u: np.ndarray
    epsilon: float
    r: NormKind

    def canonical_pairs(self):
        root = self.root_index
        yield (self.points[root], self.x_tilde, self.weights[-1],
               int(self.labels[root]), int(self.labels[-1]))

    def as_discrete(self):
        from .transport import DiscreteDist
        return DiscreteDist(self.points, self.labels, self.weights)

    def expected_loss(self, net: Mlp, kind: LossKind) -> float:
        logits = forward(net, self.points)
        return float(sum(w * loss(kind, z, int(k))
                         for z, k, w in zip(logits, self.labels, self.weights)))


def _clean_ray_direction(u: np.ndarray, cone: RecessionCone, r: NormKind) -> np.ndarray:
    """Push an LP-accurate direction exactly into the cone so long rays cannot
    drift out of the cell; renormalize to the unit r-sphere."""
    if not cone.contains(u, tol=0.0):
        projected = dykstra_project_cone(u, cone.normals)
        if np.any(projected):
            u = projected
    norm = vec_norm(u, r)
    return u / norm if norm > 0 else u


def build_worst_case_distribution(net: Mlp, data: list[LabeledSample],
                                  loss_kind: LossKind, r: NormKind,
                                  epsilon: float,
                                  witness: LowerBoundWitness,
                                  alpha_schedule=DEFAULT_ALPHA_SCHEDULE
                                  ) -> WorstCaseDistribution:
    """Materialize the mixture that moves eta/N of one sample's mass far
    along the witness ray; its transport cost to the empirical distribution
    is exactly epsilon under the canonical coupling."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n_samples = len(data)
    root = witness.root_index
    if root is None or data[root].y != witness.k_true:
        root = next((i for i, z in enumerate(data) if z.y == witness.k_true), None)
    if root is None:
        raise NoRootSample(f"no dataset point has class {witness.k_true}")

    cone = witness.cell.recession_cone()
    u = _clean_ray_direction(witness.u, cone, r)
    x_star = witness.x_interior
    anchor = data[root].x

    chosen = None
    escaped = False
    for alpha in sorted(alpha_schedule):
        x_tilde = x_star + alpha * u
        if not witness.cell.contains(x_tilde, tol=0.0):
            escaped = True
            continue
        if n_samples * epsilon < vec_norm(x_tilde - anchor, r):
            chosen = (alpha, x_tilde)
    if chosen is None:
        if escaped:
            raise CellEscape("ray left its cell at every schedule step")
        raise ValueError("no schedule alpha satisfies N*eps < ray distance; "
                         "increase the schedule or decrease epsilon")
    alpha, x_tilde = chosen
    dist = vec_norm(x_tilde - anchor, r)
    eta = n_samples * epsilon / dist
    assert 0.0 < eta <= 1.0

    points = np.vstack([np.vstack([z.x for z in data]), x_tilde[None, :]])
    labels = np.array([z.y for z in data] + [data[root].y])
    weights = np.full(n_samples + 1, 1.0 / n_samples)
    weights[root] = (1.0 - eta) / n_samples
    weights[-1] = eta / n_samples
    return WorstCaseDistribution(points, labels, weights, eta, alpha, root,
                                 x_tilde, x_star, u, epsilon, r)


@dataclass
class SmoothBounds:
    L_est: float
    l_est: float
    argmax_L: np.ndarray
    argmax_l: np.ndarray


def _fd_gradient(fn, x: np.ndarray, h: float) -> np.ndarray:
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


def smooth_bounds(net: Mlp, data: list[LabeledSample] | None, r: NormKind,
                  s: NormKind, restarts: int = 5, steps: int = 50,
                  seed: int = 0) -> SmoothBounds:
    """Heuristic certificate estimates for smooth-activation networks via
    multi-start projected finite-difference ascent inside the domain box.

    Both outputs are estimates (global optimization is heuristic); the
    invariant l_est <= L_est is asserted on every run.
    """
    if not net.activation.smooth:
        raise WrongActivation("smooth bounds require GELU or SiLU activation")
    lo, hi = net.box_lo, net.box_hi
    width = float(np.max(hi - lo))
    step = 1e-2 * width
    fd_h = max(1e-6 * width, 1e-9)

    def obj_norm(x):
        return op_norm(jacobian(net, x), r, s)

    def obj_pair(x):
        net_jac = jacobian(net, x)
        return max(vec_norm(_pair_direction(net_jac, i, j), s)
                   for i in range(net.output_dim)
                   for j in range(net.output_dim) if i != j)

    rng = np.random.default_rng(seed)
    starts = [lo + rng.random(net.input_dim) * (hi - lo) for _ in range(restarts)]
    starts.append((lo + hi) / 2.0)
    if data:
        starts.extend(z.x for z in data)

    def ascend(fn):
        best_val, best_x = -np.inf, None
        for x0 in starts:
            x = np.clip(x0, lo, hi)
            val = fn(x)
            for _ in range(steps):
                g = _fd_gradient(fn, x, fd_h)
                if not np.any(g):
                    break
                x_new = np.clip(x + step * g / vec_norm(g, NormKind.L2), lo, hi)
                val_new = fn(x_new)
                if val_new <= val:
                    break
                x, val = x_new, val_new
            if val > best_val:
                best_val, best_x = val, x
        return best_val, best_x

    norm_val, norm_x = ascend(obj_norm)
    pair_val, pair_x = ascend(obj_pair)
    l_est = pair_val
    L_est = sensitivity_factor(r) * norm_val
    assert l_est <= L_est + 1e-9, f"l_est={l_est} exceeded L_est={L_est}"
    return SmoothBounds(L_est, l_est, norm_x, pair_x)


@dataclass
class CertificateReport:
    """The certificate sandwich plus per-mask diagnostics, JSON-ready."""

    L_upper: float
    l_lower: float
    l_N: float
    per_mask: list[dict]
    tight: bool
    exhaustive: bool
    r: NormKind
    s: NormKind
    n_masks: int

    def to_json_dict(self) -> dict:
        def _finite(v):
            return v if v is not None and np.isfinite(v) else None

        return {
            "schema": "wdrokit-certificate-v1",
            "r": self.r.value,
            "s": self.s.value,
            "exhaustive": self.exhaustive,
            "upper_bound": _finite(self.L_upper),
            "lower_bound": _finite(self.l_lower),
            "practical_lower_bound": _finite(self.l_N),
            "tight": self.tight,
            "mask_count": self.n_masks,
            "per_mask": self.per_mask,
        }


def certificate_report(net: Mlp, data: list[LabeledSample], r: NormKind,
                       s: NormKind, probes: int = 0, exhaustive_cap: int = 0,
                       seed: int = 0) -> CertificateReport:
    """Run the full certificate pipeline and assemble the report."""
    inv = enumerate_masks(net, data, probes=probes, exhaustive_cap=exhaustive_cap,
                          seed=seed)
    if len(inv) == 0:
        raise EmptyInventory("no masks found: empty dataset, no probes, "
                             "and exhaustive enumeration disabled")
    upper = upper_bound_L(net, inv, r, s)
    lower = lower_bound_l(net, inv, r)
    try:
        practical = practical_lower_bound_lN(net, data, r) if data else None
    except AllDegenerate:
        practical = None
    tight = check_tightness(net, inv, r, s, upper=upper, lower=lower)
    if not inv.exhaustive:
        log.warning("mask inventory is not exhaustive; the upper bound is an "
                    "estimate, not a certificate")
    per_mask = []
    for mask in inv.masks:
        cone_value, pair = lower.per_mask.get(mask, (-np.inf, None))
        per_mask.append({
            "mask": mask_id(mask),
            "provenance": inv.provenance[mask],
            "op_norm": upper.per_mask[mask],
            "best_cone_value": None if not np.isfinite(cone_value) else cone_value,
            "best_pair": None if pair is None else list(pair),
        })
    return CertificateReport(
        L_upper=upper.value,
        l_lower=lower.value,
        l_N=practical.value if practical is not None else float("-inf"),
        per_mask=per_mask,
        tight=tight,
        exhaustive=inv.exhaustive,
        r=r,
        s=s,
        n_masks=len(inv),
    )
