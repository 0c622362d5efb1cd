"""Losses on logits: cross-entropy and the margin form of DLR, their
logit-gradients, the 2^{1/s} logit-sensitivity factor, and the asymptotic
loss-growth rate along a logit ray.

DLR here is the plain margin max_{j != k} z_j - z_k (the form the certificate
analysis uses), not the denominator-normalized variant.  Argmax ties break to
the lowest index everywhere.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .linalg import NormKind, as_vec


class LossKind(enum.Enum):
    CROSS_ENTROPY = "ce"
    DLR_MARGIN = "dlr"

    @classmethod
    def parse(cls, text: str) -> "LossKind":
        key = str(text).strip().lower()
        aliases = {"ce": cls.CROSS_ENTROPY, "cross-entropy": cls.CROSS_ENTROPY,
                   "crossentropy": cls.CROSS_ENTROPY, "dlr": cls.DLR_MARGIN,
                   "dlr-margin": cls.DLR_MARGIN}
        if key not in aliases:
            raise ValueError(f"unknown loss kind: {text!r}")
        return aliases[key]


def _check_class(logits: np.ndarray, k: int) -> None:
    if logits.size < 2:
        raise ValueError("need at least two classes")
    if not 0 <= k < logits.size:
        raise ValueError(f"class index {k} out of range for {logits.size} logits")


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-stable log-softmax (max-shift log-sum-exp), batched on last axis."""
    z = np.asarray(logits, dtype=float)
    shift = z - np.max(z, axis=-1, keepdims=True)
    return shift - np.log(np.sum(np.exp(shift), axis=-1, keepdims=True))


def _rival_max(logits: np.ndarray, k: int) -> tuple[float, int]:
    """Largest logit over j != k and its (lowest) index."""
    masked = logits.copy()
    masked[k] = -np.inf
    j = int(np.argmax(masked))
    return float(masked[j]), j


def loss(kind: LossKind, logits, k: int) -> float:
    logits = as_vec(logits)
    _check_class(logits, k)
    if kind is LossKind.CROSS_ENTROPY:
        return float(-log_softmax(logits)[k])
    rival, _ = _rival_max(logits, k)
    return rival - float(logits[k])


def loss_logit_gradient(kind: LossKind, logits, k: int) -> np.ndarray:
    """d loss / d logits: softmax(z) - e_k for CE, e_{j*} - e_k for DLR."""
    logits = as_vec(logits)
    _check_class(logits, k)
    if kind is LossKind.CROSS_ENTROPY:
        g = np.exp(log_softmax(logits))
        g[k] -= 1.0
        return g
    _, j = _rival_max(logits, k)
    g = np.zeros_like(logits)
    g[j] = 1.0
    g[k] -= 1.0
    return g


def sensitivity_factor(s: NormKind) -> float:
    """2 ** (1/p) for the norm index p.

    Both loss gradients have p-norm at most this value, so the losses are
    Lipschitz in the logits with modulus sensitivity_factor(dual(s)) against
    the s-norm (Hoelder pairs the gradient's dual norm with the increment).
    """
    if s is NormKind.L1:
        return 2.0
    if s is NormKind.L2:
        return math.sqrt(2.0)
    return 1.0


def asymptotic_rate(kind: LossKind, v, k: int) -> float:
    """lim_{alpha -> inf} (loss(z + alpha v, k) - loss(z, k)) / alpha.

    ``v`` is the logit velocity along a ray.  CE grows at max_i v_i - v_k;
    DLR at max_{i != k} v_i - v_k.
    """
    v = as_vec(v)
    _check_class(v, k)
    if kind is LossKind.CROSS_ENTROPY:
        return float(np.max(v) - v[k])
    rival, _ = _rival_max(v, k)
    return rival - float(v[k])
