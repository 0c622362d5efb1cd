"""Experiment harness: seeded model/dataset generation, the 1-D brute-force
DRO oracle, the mask-convergence experiment, and deterministic report files.

Every generator is a pure function of its spec and seed, so a pipeline run
under a fixed seed produces byte-identical outputs.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attack import AttackConfig, evaluate, pgd_baseline, wda
from .certify import (build_cell, certificate_report, enumerate_masks,
                      lower_bound_l, max_linear_over_cone_ball, upper_bound_L)
from .linalg import NormKind
from .losses import LossKind, loss
from .network import ActivationKind, LabeledSample, Mlp, forward, save_model

# ---------------------------------------------------------------------------
# Seeded generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    input_dim: int
    output_dim: int
    hidden_widths: tuple[int, ...]
    activation: ActivationKind = ActivationKind.RELU
    init_range: float = 1.0
    box_lo: float = -1.0
    box_hi: float = 1.0
    monotone: bool = False


def gen_model(spec: ModelSpec, seed: int) -> Mlp:
    """Uniform random weights in the init range; ``monotone`` forces all
    weights and biases nonnegative (tightness-condition test instances)."""
    rng = np.random.default_rng(seed)
    dims = [spec.input_dim, *spec.hidden_widths, spec.output_dim]
    low = 0.0 if spec.monotone else -spec.init_range
    layers = []
    for rows, cols in zip(dims[1:], dims[:-1]):
        w = rng.uniform(low, spec.init_range, size=(rows, cols))
        b = rng.uniform(low, spec.init_range, size=rows)
        layers.append((w, b))
    lo = np.full(spec.input_dim, spec.box_lo)
    hi = np.full(spec.input_dim, spec.box_hi)
    return Mlp(tuple(layers), spec.activation, lo, hi)


@dataclass(frozen=True)
class DataSpec:
    n_samples: int
    n_classes: int
    input_dim: int
    spread: float = 0.3
    box_lo: float = -1.0
    box_hi: float = 1.0


def gen_data(spec: DataSpec, seed: int) -> list[LabeledSample]:
    """Gaussian cluster per class (means uniform in the box), clipped to the
    box; labels cycle so classes balance up to the remainder."""
    if spec.n_samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    means = rng.uniform(spec.box_lo, spec.box_hi,
                        size=(spec.n_classes, spec.input_dim))
    samples = []
    for i in range(spec.n_samples):
        label = i % spec.n_classes
        x = means[label] + rng.normal(0.0, spec.spread, size=spec.input_dim)
        x = np.clip(x, spec.box_lo, spec.box_hi)
        samples.append(LabeledSample(x, label))
    return samples


# ---------------------------------------------------------------------------
# Dataset CSV (n feature columns + integer label column)
# ---------------------------------------------------------------------------


def save_data(samples: list[LabeledSample], path) -> None:
    n = samples[0].x.size if samples else 0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(n)] + ["label"])
        for z in samples:
            writer.writerow([repr(float(v)) for v in z.x] + [int(z.y)])


def load_data(path) -> list[LabeledSample]:
    samples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[-1] != "label":
            raise ValueError(f"{path}: expected a header ending in 'label'")
        n = len(header) - 1
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise ValueError(f"{path} line {line_no}: expected {n + 1} columns")
            samples.append(LabeledSample([float(v) for v in row[:n]], int(row[n])))
    return samples


# ---------------------------------------------------------------------------
# 1-D brute-force DRO oracle
# ---------------------------------------------------------------------------

REMARK_ANCHOR = 2.0


def remark_loss(x: float) -> float:
    """|x| near the origin, slope-1/2 outside: Lipschitz with modulus 1, yet
    the true worst-case DRO slope is only 1/2."""
    ax = abs(x)
    return ax if ax <= 1.0 else 0.5 * ax + 0.5


def remark1_oracle(epsilon: float, grid: int = 2000) -> float:
    """Brute-force sup of E[loss] over two-atom perturbations of the single
    empirical atom at x=2, under transport budget epsilon.

    Candidates move mass eta to a target t with eta * |t - 2| <= epsilon;
    targets sweep a log-spaced grid over +-[1e-3, 1e4] plus a fine linear
    grid near the anchor.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    base = remark_loss(REMARK_ANCHOR)
    if epsilon == 0:
        return base
    magnitudes = np.logspace(-3, 4, grid)
    targets = np.concatenate([-magnitudes, magnitudes,
                              np.linspace(-10.0, 10.0, grid)])
    best = base
    for t in targets:
        dist = abs(t - REMARK_ANCHOR)
        if dist < 1e-12:
            continue
        eta = min(1.0, epsilon / dist)
        best = max(best, base + eta * (remark_loss(float(t)) - base))
    return best


# ---------------------------------------------------------------------------
# Mask-convergence experiment
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceSeries:
    """Cumulative lower bound as the mask inventory grows, with the final
    upper bound and the PGD loss gain per unit budget for reference."""

    mask_counts: list[int]
    cumulative_l: list[float]
    provenances: list[str]
    L_upper: float
    pgd_gain_per_eps: float
    exhaustive: bool

    def rows(self) -> list[list]:
        out = []
        for count, value, prov in zip(self.mask_counts, self.cumulative_l,
                                      self.provenances):
            out.append([count, prov,
                        repr(float(value)) if np.isfinite(value) else "",
                        repr(float(self.L_upper)),
                        repr(float(self.pgd_gain_per_eps))])
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["mask_count", "provenance", "cumulative_l",
                             "upper_bound", "pgd_gain_per_eps"])
            writer.writerows(self.rows())


def clean_expected_loss(net: Mlp, data: list[LabeledSample],
                        loss_kind: LossKind) -> float:
    logits = forward(net, np.vstack([z.x for z in data]))
    return float(np.mean([loss(loss_kind, z, int(s.y))
                          for z, s in zip(logits, data)]))


def run_convergence(net: Mlp, data: list[LabeledSample], r: NormKind,
                    s: NormKind, probes: int = 0, exhaustive_cap: int = 0,
                    seed: int = 0, epsilon: float = 0.1,
                    pgd_step: float = 0.05, pgd_iters: int = 50,
                    loss_kind: LossKind = LossKind.CROSS_ENTROPY
                    ) -> ConvergenceSeries:
    """Grow the inventory in provenance order, tracking the running lower
    bound; attach the upper bound and a PGD reference line."""
    inv = enumerate_masks(net, data, probes=probes,
                          exhaustive_cap=exhaustive_cap, seed=seed)
    upper = upper_bound_L(net, inv, r, s)
    counts, values, provs = [], [], []
    running = -np.inf
    for count, mask in enumerate(inv.masks, start=1):
        cell = build_cell(net, mask)
        cone = cell.recession_cone()
        for k_rival in range(net.output_dim):
            for k_true in range(net.output_dim):
                if k_rival == k_true:
                    continue
                res = max_linear_over_cone_ball(
                    cell.jac[k_rival] - cell.jac[k_true], cone, r, interior=False)
                if res.feasible:
                    running = max(running, res.value)
        counts.append(count)
        values.append(running)
        provs.append(inv.provenance[mask])

    pgd = pgd_baseline(net, data, loss_kind, epsilon, r, pgd_step, pgd_iters)
    adv_loss = evaluate(net, pgd, loss_kind).expected_loss
    gain = (adv_loss - clean_expected_loss(net, data, loss_kind)) / epsilon
    return ConvergenceSeries(counts, values, provs, upper.value, gain,
                             inv.exhaustive)


# ---------------------------------------------------------------------------
# Deterministic report emission
# ---------------------------------------------------------------------------


def dump_json(payload: dict) -> str:
    """Canonical JSON text: sorted keys, stable float repr, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(payload: dict, path=None) -> None:
    text = dump_json(payload)
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def write_per_mask_csv(report, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["mask", "provenance", "op_norm", "best_cone_value",
                         "best_rival", "best_true"])
        for entry in report.per_mask:
            pair = entry["best_pair"] or ["", ""]
            writer.writerow([entry["mask"], entry["provenance"],
                             repr(float(entry["op_norm"])),
                             "" if entry["best_cone_value"] is None
                             else repr(float(entry["best_cone_value"])),
                             pair[0], pair[1]])


# ---------------------------------------------------------------------------
# Full seeded pipeline (gen -> certify -> attack -> eval -> emit)
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    seed: int = 0
    model: ModelSpec = field(default_factory=lambda: ModelSpec(2, 2, (8,)))
    data: DataSpec = field(default_factory=lambda: DataSpec(8, 2, 2))
    r: NormKind = NormKind.LINF
    probes: int = 64
    exhaustive_cap: int = 12
    epsilon: float = 0.1
    attack_kappa: float = 2.0
    attack_alpha: float = 0.05
    attack_prob: int = 10
    attack_maxiter: int = 20
    loss_kind: LossKind = LossKind.CROSS_ENTROPY

    @property
    def s(self) -> NormKind:
        # r/s duality is structural, not configurable.
        return self.r.dual()


def run_pipeline(config: ExperimentConfig, outdir) -> dict[str, Path]:
    """Generate, certify, attack, evaluate, and emit every report file.

    Returns the mapping of artifact name to path; reruns with the same
    config are byte-identical.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    net = gen_model(config.model, config.seed)
    data = gen_data(config.data, config.seed + 1)

    paths = {
        "model": outdir / "model.txt",
        "data": outdir / "data.csv",
        "certificate": outdir / "certificate.json",
        "per_mask": outdir / "per_mask.csv",
        "attack": outdir / "attack.json",
        "eval": outdir / "eval.json",
        "convergence": outdir / "convergence.csv",
    }
    save_model(net, paths["model"])
    save_data(data, paths["data"])

    report = certificate_report(net, data, config.r, config.s,
                                probes=config.probes,
                                exhaustive_cap=config.exhaustive_cap,
                                seed=config.seed)
    write_json(report.to_json_dict(), paths["certificate"])
    write_per_mask_csv(report, paths["per_mask"])

    cfg = AttackConfig(epsilon=config.epsilon, kappa=config.attack_kappa,
                       r=config.r, alpha=config.attack_alpha,
                       prob=config.attack_prob, maxiter=config.attack_maxiter,
                       seed=config.seed)
    dist = wda(net, data, cfg)
    write_json(dist.to_json_dict(), paths["attack"])
    write_json(evaluate(net, dist, config.loss_kind).to_json_dict(), paths["eval"])

    series = run_convergence(net, data, config.r, config.s,
                             probes=config.probes,
                             exhaustive_cap=config.exhaustive_cap,
                             seed=config.seed, epsilon=config.epsilon,
                             loss_kind=config.loss_kind)
    series.write_csv(paths["convergence"])
    return paths
