"""End-to-end acceptance battery.

Each test pins one advertised guarantee of the toolkit at its stated
tolerance: the 1-D oracle value, the certificate sandwich against the
constructed worst-case distribution, tightness, the convergence-experiment
shape, the global Lipschitz property, asymptotic loss rates, attack budget
feasibility and optimality, operator-norm domination, Jacobian correctness,
and byte-identical reruns.
"""

import time

import numpy as np
import pytest

from wdrokit.attack import AttackConfig, evaluate, wda
from wdrokit.certify import (build_worst_case_distribution, check_tightness,
                             enumerate_masks, lower_bound_l,
                             practical_lower_bound_lN, upper_bound_L)
from wdrokit.harness import (DataSpec, ExperimentConfig, ModelSpec,
                             clean_expected_loss, gen_data, gen_model,
                             remark1_oracle, run_convergence, run_pipeline)
from wdrokit.linalg import NormKind, op_norm, vec_norm
from wdrokit.losses import LossKind, asymptotic_rate, loss
from wdrokit.errors import DegeneratePoint
from wdrokit.network import (ActivationKind, LabeledSample, Mlp, forward,
                             jacobian)
from wdrokit.transport import canonical_cost, exact_w1_small

from test_certify import monotone_net
from test_network import linear_net, random_net


def _ce_rows(z, y):
    shift = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shift).sum(axis=1))
    return lse - shift[np.arange(len(z)), y]


def _dlr_rows(z, y):
    masked = z.copy()
    masked[np.arange(len(z)), y] = -np.inf
    return masked.max(axis=1) - z[np.arange(len(z)), y]


def test_acceptance_1_one_dim_oracle():
    start = time.monotonic()
    base = 1.5
    for eps in (0.1, 1.0, 10.0):
        value = remark1_oracle(eps)
        assert value == pytest.approx(base + eps / 2.0, abs=1e-3)
        # strictly beats the naive local-Lipschitz projection E + eps
        assert value < base + eps - 1e-6
    assert time.monotonic() - start < 5.0
    print("acceptance 1 ok: 1-D worst-case grows at the tail rate 1/2")


def test_acceptance_2_certificate_sandwich():
    start = time.monotonic()
    checked = 0
    seed = 0
    while checked < 50 and seed < 400:
        seed += 1
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        k = int(rng.integers(2, 4))
        width = int(rng.integers(3, 6))
        net = gen_model(ModelSpec(n, k, (width,)), seed)
        data = gen_data(DataSpec(4, k, n), seed + 1000)
        inv = enumerate_masks(net, data, exhaustive_cap=width)
        assert inv.exhaustive
        res = practical_lower_bound_lN(net, data, NormKind.LINF)
        w = res.witness
        if w is None or w.u is None or not np.any(w.u):
            continue
        L = upper_bound_L(net, inv, NormKind.LINF, NormKind.L1).value
        clean = clean_expected_loss(net, data, LossKind.CROSS_ENTROPY)
        ok = True
        for eps in (0.01, 0.1):
            try:
                wc = build_worst_case_distribution(
                    net, data, LossKind.CROSS_ENTROPY, NormKind.LINF, eps, w)
            except ValueError:
                ok = False
                break
            gain = wc.expected_loss(net, LossKind.CROSS_ENTROPY) - clean
            assert gain >= res.value * eps - 1e-6
            assert gain <= L * eps + 1e-6
        if ok:
            checked += 1
    assert checked == 50
    assert time.monotonic() - start < 120.0
    print(f"acceptance 2 ok: sandwich held on {checked} networks")


def test_acceptance_3_tightness_equality():
    tight = 0
    for seed in range(80):
        net = monotone_net(seed, n=2, width=4)
        inv = enumerate_masks(net, [], exhaustive_cap=4)
        upper = upper_bound_L(net, inv, NormKind.LINF, NormKind.L1)
        lower = lower_bound_l(net, inv, NormKind.LINF)
        if check_tightness(net, inv, NormKind.LINF, NormKind.L1,
                           upper=upper, lower=lower):
            assert abs(lower.value - upper.value) <= 1e-6 * max(1.0, upper.value)
            tight += 1
        if tight == 50:
            break
    assert tight == 50
    print("acceptance 3 ok: 50 tight instances with matching bounds")


def test_acceptance_4_convergence_shape():
    done = False
    for seed in range(40):
        net = gen_model(ModelSpec(2, 2, (8,)), seed)
        inv = enumerate_masks(net, [], exhaustive_cap=8)
        lower = lower_bound_l(net, inv, NormKind.LINF)
        w = lower.witness
        if w is None or not np.isfinite(lower.value) or lower.value <= 0:
            continue
        # anchor the single sample strictly inside the maximizing cell so the
        # one-step PGD slope is that cell's exact dual-norm gradient
        data = [LabeledSample(w.x_interior, w.k_true)]
        eps = 1e-3
        series = run_convergence(net, data, NormKind.LINF, NormKind.L1,
                                 probes=32, exhaustive_cap=8, seed=0,
                                 epsilon=eps, pgd_step=eps, pgd_iters=10,
                                 loss_kind=LossKind.DLR_MARGIN)
        vals = series.cumulative_l
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
        assert len(vals) >= 4
        assert vals[-1] - vals[-4] < 1e-9
        assert vals[-1] <= series.L_upper + 1e-9
        assert series.pgd_gain_per_eps >= vals[-1] - 1e-6
        assert series.pgd_gain_per_eps <= series.L_upper + 1e-6
        done = True
        break
    assert done
    print("acceptance 4 ok: convergence series shape and PGD bracketing")


def test_acceptance_5_global_lipschitz():
    rng = np.random.default_rng(123)
    for net_seed in range(20):
        n = int(rng.integers(1, 4))
        k = int(rng.integers(2, 4))
        width = int(rng.integers(3, 7))
        net = gen_model(ModelSpec(n, k, (width,)), net_seed)
        inv = enumerate_masks(net, [], exhaustive_cap=width)
        xs = rng.uniform(-1.0, 1.0, size=(10_000, n))
        ys = rng.uniform(-1.0, 1.0, size=(10_000, n))
        labels = rng.integers(0, k, size=10_000)
        zx, zy = forward(net, xs), forward(net, ys)
        for r in NormKind:
            L = upper_bound_L(net, inv, r, r.dual()).value
            if r is NormKind.L1:
                dx = np.abs(xs - ys).sum(axis=1)
            elif r is NormKind.L2:
                dx = np.sqrt(((xs - ys) ** 2).sum(axis=1))
            else:
                dx = np.abs(xs - ys).max(axis=1)
            for rows in (_ce_rows, _dlr_rows):
                gap = np.abs(rows(zx, labels) - rows(zy, labels))
                assert np.all(gap <= L * dx + 1e-9)
    print("acceptance 5 ok: certified modulus bounds every loss increment")


def test_acceptance_6_asymptotic_rates():
    rng = np.random.default_rng(7)
    alpha = 1e6
    for _ in range(100):
        m = int(rng.integers(2, 5))
        theta = rng.normal(size=m) * 2.0
        v = rng.normal(size=m)
        k = int(rng.integers(m))
        for kind in LossKind:
            numeric = (loss(kind, theta + alpha * v, k) - loss(kind, theta, k)) / alpha
            assert numeric == pytest.approx(asymptotic_rate(kind, v, k), abs=1e-3)
    print("acceptance 6 ok: ray rates match the large-step limit")


def test_acceptance_7_attack_guarantees():
    # budget feasibility: canonical accounting and the exact coupling
    for seed, kappa in ((1, 1.0), (2, 2.0), (3, 4.0)):
        net = gen_model(ModelSpec(2, 2, (5,)), seed)
        data = gen_data(DataSpec(10, 2, 2), seed + 20)
        for r in NormKind:
            cfg = AttackConfig(epsilon=0.1, kappa=kappa, r=r, alpha=0.3,
                               prob=3, maxiter=6)
            dist = wda(net, data, cfg)
            assert canonical_cost(dist, r) <= cfg.epsilon + 1e-9
            empirical = np.vstack([z.x for z in data])
            from wdrokit.transport import DiscreteDist
            emp = DiscreteDist(empirical, np.array([z.y for z in data]),
                               np.full(len(data), 1.0 / len(data)))
            w1 = exact_w1_small(dist.as_discrete().drop_zero_atoms(), emp, r)
            assert w1 <= cfg.epsilon + 1e-9
    # kappa mixture reductions
    net = gen_model(ModelSpec(2, 2, (4,)), 5)
    data = gen_data(DataSpec(6, 2, 2), 6)
    d1 = wda(net, data, AttackConfig(epsilon=0.05, kappa=1.0, prob=2, maxiter=4))
    assert d1.anchor_weight == 0.0
    ev1 = evaluate(net, d1, LossKind.CROSS_ENTROPY)
    assert ev1.weighted_accuracy == pytest.approx(ev1.adv_accuracy)
    d2 = wda(net, data, AttackConfig(epsilon=0.05, kappa=2.0, prob=2, maxiter=4))
    assert d2.anchor_weight == pytest.approx(1.0 / (2 * len(data)))
    assert d2.adv_weight == pytest.approx(1.0 / (2 * len(data)))
    assert np.allclose(d2.as_discrete().weights, 1.0 / (2 * len(data)))
    # single-cell exact optimum
    rng = np.random.default_rng(9)
    for r in NormKind:
        w = rng.normal(size=(2, 3))
        net = linear_net(w, box=50.0)
        sample = LabeledSample(rng.normal(size=3) * 0.1, 0)
        eps, kappa = 0.25, 2.0
        dist = wda(net, [sample],
                   AttackConfig(epsilon=eps, kappa=kappa, r=r,
                                alpha=4.0 * kappa * eps, prob=1, maxiter=1))
        g = w[1] - w[0]
        logits0 = forward(net, sample.x)
        logits1 = forward(net, dist.adv[0])
        gap = (logits1[1] - logits1[0]) - (logits0[1] - logits0[0])
        assert gap == pytest.approx(kappa * eps * vec_norm(g, r.dual()), abs=1e-9)
    print("acceptance 7 ok: attack budget, mixture, and single-cell optimum")


def test_acceptance_8_operator_norm_domination():
    rng = np.random.default_rng(17)
    for trial in range(3):
        m = int(rng.integers(2, 4))
        n = int(rng.integers(2, 5))
        a = rng.normal(size=(m, n)) * 2.0
        dirs = rng.normal(size=(100_000, n))
        for r in NormKind:
            if r is NormKind.L1:
                scale = np.abs(dirs).sum(axis=1)
            elif r is NormKind.L2:
                scale = np.sqrt((dirs ** 2).sum(axis=1))
            else:
                scale = np.abs(dirs).max(axis=1)
            u = dirs / scale[:, None]
            out = u @ a.T  # (100000, m)
            for s in NormKind:
                if s is NormKind.L1:
                    searched = np.abs(out).sum(axis=1).max()
                elif s is NormKind.L2:
                    searched = np.sqrt((out ** 2).sum(axis=1)).max()
                else:
                    searched = np.abs(out).max()
                assert op_norm(a, r, s) >= searched - 1e-6
    # LInf source: the certified value equals the full sign-vertex sweep
    for n in (2, 5, 10):
        a = rng.normal(size=(3, n))
        for s in NormKind:
            brute = 0.0
            for bits in range(2 ** n):
                u = np.array([1.0 if (bits >> j) & 1 else -1.0 for j in range(n)])
                brute = max(brute, vec_norm(a @ u, s))
            assert op_norm(a, NormKind.LINF, s) == brute
    print("acceptance 8 ok: operator norms dominate a 1e5-direction search")


def test_acceptance_9_jacobian_fd():
    rng = np.random.default_rng(21)
    h = 1e-6
    for act in ActivationKind:
        for _ in range(8):
            n = int(rng.integers(1, 4))
            k = int(rng.integers(2, 4))
            net = random_net(rng, n, k, (int(rng.integers(3, 6)),), act)
            for _ in range(4):
                x = rng.uniform(-0.9, 0.9, size=n)
                try:
                    jac = jacobian(net, x)
                except DegeneratePoint:
                    continue
                fd = np.zeros_like(jac)
                for j in range(n):
                    e = np.zeros(n)
                    e[j] = h
                    fd[:, j] = (forward(net, x + e) - forward(net, x - e)) / (2 * h)
                assert np.max(np.abs(jac - fd)) <= 1e-4
    print("acceptance 9 ok: Jacobians match central differences")


def test_acceptance_10_deterministic_pipeline(tmp_path):
    cfg = ExperimentConfig(seed=11, model=ModelSpec(2, 2, (6,)),
                           data=DataSpec(8, 2, 2), probes=32, exhaustive_cap=6,
                           epsilon=0.05)
    first = run_pipeline(cfg, tmp_path / "run1")
    second = run_pipeline(cfg, tmp_path / "run2")
    for name in first:
        assert first[name].read_bytes() == second[name].read_bytes(), name
    print("acceptance 10 ok: rerun artifacts are byte-identical")
