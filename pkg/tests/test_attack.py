import json

import numpy as np
import pytest

from wdrokit.attack import (AdvDistribution, AttackConfig, evaluate,
                            pgd_baseline, wda)
from wdrokit.harness import DataSpec, ModelSpec, gen_data, gen_model
from wdrokit.linalg import NormKind, vec_norm
from wdrokit.losses import LossKind, loss
from wdrokit.network import ActivationKind, LabeledSample, Mlp, forward
from wdrokit.transport import canonical_cost

from test_network import linear_net, random_net


def small_problem(seed=0, n=2, k=2, width=4, m=5):
    net = gen_model(ModelSpec(n, k, (width,)), seed)
    data = gen_data(DataSpec(m, k, n), seed + 100)
    return net, data


def test_config_validation():
    AttackConfig(epsilon=0.1)  # defaults are legal
    with pytest.raises(ValueError):
        AttackConfig(epsilon=0.0)
    with pytest.raises(ValueError):
        AttackConfig(epsilon=0.1, kappa=0.5)
    with pytest.raises(ValueError):
        AttackConfig(epsilon=0.1, alpha=0.0)
    with pytest.raises(ValueError):
        AttackConfig(epsilon=0.1, prob=5, maxiter=3)
    with pytest.raises(ValueError):
        AttackConfig(epsilon=0.1, prob=0)


def test_mixture_weights():
    net, data = small_problem()
    n = len(data)
    dist = wda(net, data, AttackConfig(epsilon=0.05, kappa=1.0, prob=2, maxiter=2))
    assert dist.anchor_weight == 0.0
    assert dist.adv_weight == pytest.approx(1.0 / n)
    dist2 = wda(net, data, AttackConfig(epsilon=0.05, kappa=2.0, prob=2, maxiter=2))
    assert dist2.anchor_weight == pytest.approx(1.0 / (2 * n))
    assert dist2.adv_weight == pytest.approx(1.0 / (2 * n))
    assert dist2.as_discrete().weights.sum() == pytest.approx(1.0)


def test_budget_feasible_all_norms():
    for r in NormKind:
        for kappa in (1.0, 2.0, 4.0):
            net, data = small_problem(seed=int(kappa))
            cfg = AttackConfig(epsilon=0.1, kappa=kappa, r=r, alpha=0.5,
                               prob=3, maxiter=6)
            dist = wda(net, data, cfg)
            # every moved point stays in the kappa*epsilon ball ...
            for z, moved in zip(data, dist.adv):
                assert vec_norm(moved - z.x, r) <= kappa * cfg.epsilon + 1e-9
            # ... so the mixture's transport budget is epsilon
            assert canonical_cost(dist, r) <= cfg.epsilon + 1e-9


def test_rival_frozen_after_probing():
    net, data = small_problem(k=3, width=6)
    cfg = AttackConfig(epsilon=0.2, kappa=1.0, alpha=0.05, prob=3, maxiter=9,
                       record_trace=True)
    dist = wda(net, data, cfg)
    for trace in dist.traces:
        frozen = trace.rivals[cfg.prob - 1]
        assert all(j == frozen for j in trace.rivals[cfg.prob:])


def test_deterministic_across_runs_and_workers():
    net, data = small_problem(seed=7)
    cfg = AttackConfig(epsilon=0.1, kappa=2.0, alpha=0.05, prob=4, maxiter=8)
    a = wda(net, data, cfg).adv
    b = wda(net, data, cfg).adv
    c = wda(net, data, AttackConfig(epsilon=0.1, kappa=2.0, alpha=0.05,
                                    prob=4, maxiter=8, workers=3)).adv
    assert np.array_equal(a, b)
    assert np.array_equal(a, c)


def test_single_cell_closed_form():
    # On a purely linear two-logit net one big step saturates the budget in
    # the dual-maximizing direction, so the attacked margin gap equals
    # kappa * epsilon * ||W^T (e_j* - e_k)||_{r'}.
    rng = np.random.default_rng(5)
    for r in NormKind:
        w = rng.normal(size=(2, 3))
        net = linear_net(w, box=50.0)
        anchor = rng.normal(size=3) * 0.1
        sample = LabeledSample(anchor, 0)
        eps, kappa = 0.3, 2.0
        cfg = AttackConfig(epsilon=eps, kappa=kappa, r=r,
                           alpha=4.0 * kappa * eps, prob=1, maxiter=1)
        dist = wda(net, [sample], cfg)
        g = w[1] - w[0]
        gap_expected = kappa * eps * vec_norm(g, r.dual())
        logits0 = forward(net, anchor)
        logits1 = forward(net, dist.adv[0])
        gap = (logits1[1] - logits1[0]) - (logits0[1] - logits0[0])
        assert gap == pytest.approx(gap_expected, abs=1e-9)


def test_pgd_zero_radius_is_identity():
    net, data = small_problem(seed=3)
    dist = pgd_baseline(net, data, LossKind.CROSS_ENTROPY, 0.0,
                        NormKind.LINF, step=0.1, iters=5)
    assert np.allclose(dist.adv, np.vstack([z.x for z in data]))
    assert dist.kappa == 1.0


def test_pgd_respects_ball_and_does_not_hurt():
    rng = np.random.default_rng(11)
    for r in NormKind:
        net = linear_net(rng.normal(size=(3, 2)), box=50.0)
        data = [LabeledSample(rng.normal(size=2), int(rng.integers(3)))
                for _ in range(6)]
        eps = 0.2
        dist = pgd_baseline(net, data, LossKind.CROSS_ENTROPY, eps, r,
                            step=eps, iters=1)
        for z, moved in zip(data, dist.adv):
            assert vec_norm(moved - z.x, r) <= eps + 1e-9
            before = loss(LossKind.CROSS_ENTROPY, forward(net, z.x), z.y)
            after = loss(LossKind.CROSS_ENTROPY, forward(net, moved), z.y)
            assert after >= before - 1e-12


def test_pgd_smooth_activation_runs():
    rng = np.random.default_rng(4)
    net = random_net(rng, 2, 2, (5,), ActivationKind.SILU)
    data = gen_data(DataSpec(4, 2, 2), 9)
    dist = pgd_baseline(net, data, LossKind.DLR_MARGIN, 0.1, NormKind.L2,
                        step=0.02, iters=10)
    assert dist.adv.shape == (4, 2)


def test_evaluate_reductions():
    net, data = small_problem(seed=6)
    ev1 = evaluate(net, wda(net, data, AttackConfig(epsilon=0.1, kappa=1.0,
                                                    prob=2, maxiter=4)),
                   LossKind.CROSS_ENTROPY)
    assert ev1.weighted_accuracy == pytest.approx(ev1.adv_accuracy)
    ev2 = evaluate(net, wda(net, data, AttackConfig(epsilon=0.1, kappa=2.0,
                                                    prob=2, maxiter=4)),
                   LossKind.CROSS_ENTROPY)
    assert ev2.weighted_accuracy == pytest.approx(
        0.5 * (ev2.clean_accuracy + ev2.adv_accuracy))
    # unmoved points reduce to the clean statistics
    still = pgd_baseline(net, data, LossKind.CROSS_ENTROPY, 0.0,
                         NormKind.LINF, step=0.1, iters=1)
    ev0 = evaluate(net, still, LossKind.CROSS_ENTROPY)
    clean = float(np.mean([loss(LossKind.CROSS_ENTROPY, forward(net, z.x), z.y)
                           for z in data]))
    assert ev0.adv_accuracy == ev0.clean_accuracy
    assert ev0.expected_loss == pytest.approx(clean)


def test_attack_beats_or_matches_clean_loss():
    for seed in range(5):
        net, data = small_problem(seed=seed)
        dist = wda(net, data, AttackConfig(epsilon=0.1, kappa=1.0, alpha=0.02,
                                           prob=5, maxiter=10))
        ev = evaluate(net, dist, LossKind.DLR_MARGIN)
        clean = float(np.mean([loss(LossKind.DLR_MARGIN, forward(net, z.x), z.y)
                               for z in data]))
        assert ev.expected_loss >= clean - 1e-9


def test_json_roundtrip():
    net, data = small_problem(seed=8)
    dist = wda(net, data, AttackConfig(epsilon=0.07, kappa=3.0, prob=2, maxiter=3,
                                       r=NormKind.L2))
    payload = json.loads(json.dumps(dist.to_json_dict(), sort_keys=True))
    back = AdvDistribution.from_json_dict(payload, data)
    assert np.allclose(back.adv, dist.adv)
    assert back.kappa == dist.kappa
    assert back.epsilon == dist.epsilon
    assert back.r is dist.r
    with pytest.raises(ValueError):
        AdvDistribution.from_json_dict({"schema": "other"}, data)


def test_single_class_net_rejected():
    net = linear_net(np.array([[1.0, 0.0]]))
    with pytest.raises(ValueError):
        wda(net, [LabeledSample([0.0, 0.0], 0)], AttackConfig(epsilon=0.1))
