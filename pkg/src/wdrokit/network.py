"""Small MLP classifiers: evaluation, pre-activations, ReLU masks, Jacobians,
and the versioned text model format.

An :class:`Mlp` is a frozen value: tuple of ``(weight, bias)`` layers, an
activation kind, and the axis-aligned input box over which all suprema are
interpreted.  Networks are tiny (desk scale), so everything is dense numpy.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf as _erf

from .errors import DegeneratePoint, DimensionMismatch, WrongActivation
from .linalg import as_mat, as_vec

# |pre-activation| at or below this is treated as sitting on a cell boundary.
DEGENERACY_TOL = 1e-12

MODEL_FORMAT_TAG = "wdro-mlp"
MODEL_FORMAT_VERSION = 1

# A mask is one 0/1 tuple per hidden layer; hashable so inventories dedupe.
Mask = tuple[tuple[int, ...], ...]


class ActivationKind(enum.Enum):
    RELU = "relu"
    GELU = "gelu"
    SILU = "silu"

    @property
    def smooth(self) -> bool:
        return self is not ActivationKind.RELU

    @classmethod
    def parse(cls, text: str) -> "ActivationKind":
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(f"unknown activation: {text!r}") from None


def _gelu(z: np.ndarray) -> np.ndarray:
    # Exact Gaussian-CDF form, not the tanh approximation.
    return z * 0.5 * (1.0 + _erf(z / math.sqrt(2.0)))


def _gelu_prime(z: np.ndarray) -> np.ndarray:
    phi = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return 0.5 * (1.0 + _erf(z / math.sqrt(2.0))) + z * phi


def _silu(z: np.ndarray) -> np.ndarray:
    sig = 1.0 / (1.0 + np.exp(-z))
    return z * sig


def _silu_prime(z: np.ndarray) -> np.ndarray:
    sig = 1.0 / (1.0 + np.exp(-z))
    return sig * (1.0 + z * (1.0 - sig))


def _apply_activation(kind: ActivationKind, z: np.ndarray) -> np.ndarray:
    if kind is ActivationKind.RELU:
        return np.maximum(z, 0.0)
    if kind is ActivationKind.GELU:
        return _gelu(z)
    return _silu(z)


def _activation_prime(kind: ActivationKind, z: np.ndarray) -> np.ndarray:
    if kind is ActivationKind.RELU:
        return (z > 0.0).astype(float)
    if kind is ActivationKind.GELU:
        return _gelu_prime(z)
    return _silu_prime(z)


@dataclass(frozen=True)
class Mlp:
    """An H-hidden-layer MLP x -> W_{H+1}(act(...(W_1 x + b_1)...) + b_H).

    ``layers`` holds H+1 (weight, bias) pairs; ``box_lo``/``box_hi`` declare
    the input domain box used by every sup over the input space.
    """

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    activation: ActivationKind
    box_lo: np.ndarray
    box_hi: np.ndarray

    def __post_init__(self):
        if not self.layers:
            raise ValueError("an Mlp needs at least one layer")
        layers = tuple((as_mat(w), as_vec(b)) for w, b in self.layers)
        for w, b in layers:
            if w.shape[0] != b.size:
                raise DimensionMismatch(
                    f"bias length {b.size} does not match weight rows {w.shape[0]}"
                )
        for (w0, _), (w1, _) in zip(layers, layers[1:]):
            if w1.shape[1] != w0.shape[0]:
                raise DimensionMismatch(
                    f"layer shapes do not chain: {w0.shape} -> {w1.shape}"
                )
        lo = as_vec(self.box_lo)
        hi = as_vec(self.box_hi)
        if lo.size != layers[0][0].shape[1] or hi.size != lo.size:
            raise DimensionMismatch("domain box must match the input dimension")
        if np.any(lo > hi):
            raise ValueError("domain box has lo > hi")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.layers[-1][0].shape[0]

    @property
    def n_hidden(self) -> int:
        return len(self.layers) - 1

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w, _ in self.layers[:-1])


@dataclass(frozen=True)
class LabeledSample:
    """An input point and its true class index."""

    x: np.ndarray
    y: int

    def __post_init__(self):
        object.__setattr__(self, "x", as_vec(self.x))
        object.__setattr__(self, "y", int(self.y))


def _check_input(net: Mlp, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise DimensionMismatch(
            f"input dimension {x.shape[-1]} != network input {net.input_dim}"
        )
    return x


def forward(net: Mlp, x) -> np.ndarray:
    """Logits theta(x).  Accepts a single point (n,) or a batch (m, n)."""
    x = _check_input(net, x)
    h = x
    for w, b in net.layers[:-1]:
        h = _apply_activation(net.activation, h @ w.T + b)
    w, b = net.layers[-1]
    return h @ w.T + b


def pre_activations(net: Mlp, x) -> list[np.ndarray]:
    """Pre-nonlinearity values pre_h(x) for h = 1..H (empty list when H=0)."""
    x = _check_input(net, as_vec(x))
    pres = []
    h = x
    for w, b in net.layers[:-1]:
        z = h @ w.T + b
        pres.append(z)
        h = _apply_activation(net.activation, z)
    return pres


def mask_at(net: Mlp, x) -> tuple[Mask, bool]:
    """Activation mask at x plus a degeneracy flag for on-boundary points."""
    if net.activation is not ActivationKind.RELU:
        raise WrongActivation("masks are defined for ReLU networks only")
    pres = pre_activations(net, x)
    degenerate = any(np.any(np.abs(z) <= DEGENERACY_TOL) for z in pres)
    mask = tuple(tuple(int(v > 0.0) for v in z) for z in pres)
    return mask, degenerate


def masked_jacobian(net: Mlp, mask: Mask) -> np.ndarray:
    """K x n Jacobian W_{H+1} D_H W_H ... D_1 W_1 for a fixed 0/1 mask."""
    if net.activation is not ActivationKind.RELU:
        raise WrongActivation("masked Jacobians are defined for ReLU networks only")
    if len(mask) != net.n_hidden:
        raise DimensionMismatch(
            f"mask has {len(mask)} layers, network has {net.n_hidden} hidden layers"
        )
    jac = None
    for (w, _), diag in zip(net.layers[:-1], mask):
        d = np.asarray(diag, dtype=float)
        if d.size != w.shape[0]:
            raise DimensionMismatch("mask width does not match layer width")
        part = w if jac is None else w @ jac
        jac = d[:, None] * part
    w_last = net.layers[-1][0]
    return w_last.copy() if jac is None else w_last @ jac


def jacobian(net: Mlp, x) -> np.ndarray:
    """Exact input-Jacobian of the logits at x.

    For ReLU this equals the masked Jacobian of the mask at x and raises
    :class:`DegeneratePoint` on a kink; smooth activations use the chain rule.
    """
    x = as_vec(x)
    if net.activation is ActivationKind.RELU:
        mask, degenerate = mask_at(net, x)
        if degenerate:
            raise DegeneratePoint("ReLU Jacobian is not unique on a kink")
        return masked_jacobian(net, mask)
    _check_input(net, x)
    jac = None
    h = x
    for w, b in net.layers[:-1]:
        z = h @ w.T + b
        part = w if jac is None else w @ jac
        jac = _activation_prime(net.activation, z)[:, None] * part
        h = _apply_activation(net.activation, z)
    w_last = net.layers[-1][0]
    return w_last.copy() if jac is None else w_last @ jac


# ---------------------------------------------------------------------------
# Model file format (text, versioned); grammar documented in FORMATS.md.
# ---------------------------------------------------------------------------


class ModelFormatError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"model file line {line_no}: {message}")
        self.line_no = line_no


def save_model(net: Mlp, path) -> None:
    lines = [f"{MODEL_FORMAT_TAG} {MODEL_FORMAT_VERSION}"]
    lines.append(f"input {net.input_dim}")
    lines.append(f"output {net.output_dim}")
    lines.append(f"hidden {net.n_hidden}")
    lines.append(f"activation {net.activation.value}")
    for lo, hi in zip(net.box_lo, net.box_hi):
        lines.append(f"box {float(lo)!r} {float(hi)!r}")
    for w, b in net.layers:
        lines.append(f"layer {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append("bias " + " ".join(repr(float(v)) for v in b))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class _LineReader:
    def __init__(self, path):
        with open(path) as fh:
            self.lines = fh.read().splitlines()
        self.pos = 0

    def next(self) -> tuple[int, str]:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line and not line.startswith("#"):
                return self.pos, line
        raise ModelFormatError(len(self.lines) + 1, "unexpected end of file")


def _expect_keyword(reader: _LineReader, keyword: str) -> list[str]:
    no, line = reader.next()
    parts = line.split()
    if parts[0] != keyword:
        raise ModelFormatError(no, f"expected {keyword!r}, found {parts[0]!r}")
    return parts[1:]


def _parse_floats(no: int, tokens: list[str], count: int, what: str) -> np.ndarray:
    if len(tokens) != count:
        raise ModelFormatError(no, f"expected {count} values for {what}, found {len(tokens)}")
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise ModelFormatError(no, f"bad number in {what}: {exc}") from None


def load_model(path) -> Mlp:
    """Parse a model file; shape errors carry the offending line number."""
    reader = _LineReader(path)
    no, header = reader.next()
    parts = header.split()
    if parts[0] != MODEL_FORMAT_TAG:
        raise ModelFormatError(no, f"not a {MODEL_FORMAT_TAG} file")
    if len(parts) != 2 or parts[1] != str(MODEL_FORMAT_VERSION):
        raise ModelFormatError(no, f"unsupported format version {parts[1:]}")

    def _int_field(keyword: str) -> int:
        toks = _expect_keyword(reader, keyword)
        if len(toks) != 1 or not toks[0].lstrip("-").isdigit():
            raise ModelFormatError(reader.pos, f"{keyword} takes one integer")
        return int(toks[0])

    n = _int_field("input")
    k = _int_field("output")
    n_hidden = _int_field("hidden")
    if n < 1 or k < 1 or n_hidden < 0:
        raise ModelFormatError(reader.pos, "dimensions must be positive (hidden >= 0)")
    act_tokens = _expect_keyword(reader, "activation")
    try:
        activation = ActivationKind.parse(act_tokens[0])
    except (IndexError, ValueError):
        raise ModelFormatError(reader.pos, f"bad activation {act_tokens!r}") from None
    lo, hi = np.zeros(n), np.zeros(n)
    for i in range(n):
        toks = _expect_keyword(reader, "box")
        vals = _parse_floats(reader.pos, toks, 2, "box line")
        lo[i], hi[i] = vals
    layers = []
    prev_width = n
    for layer_idx in range(n_hidden + 1):
        toks = _expect_keyword(reader, "layer")
        no = reader.pos
        dims = _parse_floats(no, toks, 2, "layer dims")
        rows, cols = int(dims[0]), int(dims[1])
        if cols != prev_width:
            raise ModelFormatError(
                no, f"layer {layer_idx + 1} has {cols} columns, expected {prev_width}"
            )
        w = np.zeros((rows, cols))
        for i in range(rows):
            no, line = reader.next()
            w[i] = _parse_floats(no, line.split(), cols, f"weight row {i + 1}")
        toks = _expect_keyword(reader, "bias")
        b = _parse_floats(reader.pos, toks, rows, "bias")
        layers.append((w, b))
        prev_width = rows
    if prev_width != k:
        raise ModelFormatError(reader.pos, f"final layer has {prev_width} rows, expected {k}")
    return Mlp(tuple(layers), activation, lo, hi)
