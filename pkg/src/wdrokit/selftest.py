"""Built-in invariant battery behind the ``selftest`` subcommand.

Each check exercises one structural property end to end on seeded random
instances; failures are counted and reported, never raised.
"""

from __future__ import annotations

import sys

import numpy as np

from .attack import AttackConfig, wda
from .certify import (certificate_report, enumerate_masks, lower_bound_l,
                      upper_bound_L)
from .harness import DataSpec, ModelSpec, gen_data, gen_model, remark1_oracle
from .linalg import NormKind, dual_norm_maximizer, op_norm, project_ball, vec_norm
from .network import ActivationKind, forward, jacobian
from .transport import canonical_cost


def _check_duality(rng) -> bool:
    """<g, M_r(g)> == dual norm of g, and the maximizer has unit r-norm."""
    for _ in range(200):
        n = int(rng.integers(1, 8))
        g = rng.normal(size=n)
        for r in NormKind:
            u = dual_norm_maximizer(g, r)
            if abs(vec_norm(u, r) - 1.0) > 1e-12:
                return False
            if abs(float(g @ u) - vec_norm(g, r.dual())) > 1e-10:
                return False
    return True


def _check_projection(rng) -> bool:
    """Projections land in the ball and beat random feasible points."""
    for _ in range(50):
        n = int(rng.integers(1, 6))
        center = rng.normal(size=n)
        radius = float(rng.uniform(0.5, 2.0))
        x = rng.normal(size=n) * 3
        for r in NormKind:
            p = project_ball(x, center, radius, r)
            if vec_norm(p - center, r) > radius + 1e-9:
                return False
            for _ in range(20):
                q = center + radius * rng.uniform(-1, 1, size=n) / max(1, n)
                if vec_norm(q - center, r) <= radius:
                    if np.linalg.norm(x - q) < np.linalg.norm(x - p) - 1e-9:
                        return False
    return True


def _check_opnorm(rng) -> bool:
    """Computed operator norms dominate random-direction search."""
    for _ in range(10):
        a = rng.normal(size=(int(rng.integers(1, 5)), int(rng.integers(1, 5))))
        for r in NormKind:
            for s in NormKind:
                val = op_norm(a, r, s)
                for _ in range(200):
                    u = rng.normal(size=a.shape[1])
                    nu = vec_norm(u, r)
                    if nu > 0 and vec_norm(a @ u, s) / nu > val + 1e-8:
                        return False
    return True


def _check_sandwich(rng) -> bool:
    """On small exhaustive ReLU nets the lower bound never exceeds the upper."""
    for seed in range(5):
        net = gen_model(ModelSpec(2, 2, (4,)), seed)
        data = gen_data(DataSpec(6, 2, 2), seed + 100)
        inv = enumerate_masks(net, data, exhaustive_cap=8, seed=seed)
        upper = upper_bound_L(net, inv, NormKind.LINF, NormKind.L1)
        lower = lower_bound_l(net, inv, NormKind.LINF)
        if lower.value > upper.value + 1e-9:
            return False
    return True


def _check_attack_feasible(rng) -> bool:
    """Attack mixtures stay within the canonical transport budget."""
    net = gen_model(ModelSpec(2, 3, (5,)), 7)
    data = gen_data(DataSpec(6, 3, 2), 8)
    cfg = AttackConfig(epsilon=0.1, kappa=2.0, r=NormKind.LINF, alpha=0.05)
    dist = wda(net, data, cfg)
    return canonical_cost(dist, cfg.r) <= cfg.epsilon + 1e-9


def _check_jacobian(rng) -> bool:
    """Analytic Jacobians match central differences on smooth activations."""
    for act in (ActivationKind.GELU, ActivationKind.SILU):
        net = gen_model(ModelSpec(3, 2, (4,), activation=act), 3)
        x = rng.uniform(-0.5, 0.5, size=3)
        jac = jacobian(net, x)
        h = 1e-6
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            fd = (forward(net, x + e) - forward(net, x - e)) / (2 * h)
            if np.max(np.abs(jac[:, i] - fd)) > 1e-5:
                return False
    return True


def _check_oracle(rng) -> bool:
    """The 1-D oracle grows at half the Lipschitz rate for small budgets."""
    base = remark1_oracle(0.0)
    for eps in (0.1, 1.0):
        if abs(remark1_oracle(eps) - (base + eps / 2)) > 1e-3:
            return False
    return True


_CHECKS = [
    ("dual-norm maximizer duality", _check_duality),
    ("ball projection optimality", _check_projection),
    ("operator norms dominate search", _check_opnorm),
    ("lower bound below upper bound", _check_sandwich),
    ("attack transport feasibility", _check_attack_feasible),
    ("smooth Jacobian finite differences", _check_jacobian),
    ("1-D oracle half-rate growth", _check_oracle),
]


def run(seed: int = 0, stream=None) -> int:
    """Run every check; return the number of failures."""
    stream = stream or sys.stderr
    rng = np.random.default_rng(seed)
    failures = 0
    for name, check in _CHECKS:
        ok = check(rng)
        print(f"{'ok  ' if ok else 'FAIL'} {name}", file=stream)
        if not ok:
            failures += 1
    return failures
