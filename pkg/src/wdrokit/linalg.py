"""Dense vector/matrix helpers: norms, dual-norm maximizers, ball projections
and induced operator norms ||A||_{r->s} for r, s in {1, 2, inf}.

All functions operate on plain numpy arrays.  ``as_vec``/``as_mat`` coerce
inputs and reject non-finite entries up front, so downstream code never has to
defend against NaN/Inf.
"""

from __future__ import annotations

import enum
import itertools

import numpy as np

from .errors import DimensionTooLarge

# Exact sign-vertex enumeration for LInf-source operator norms is exponential;
# refuse beyond this many input coordinates instead of silently approximating.
SIGN_VERTEX_CAP = 24

_POWER_ITER_RESTARTS = 10
_POWER_ITER_MAX = 10_000
_POWER_ITER_RTOL = 1e-10


class NormKind(enum.Enum):
    """The three vector norms the toolkit supports."""

    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    def dual(self) -> "NormKind":
        if self is NormKind.L1:
            return NormKind.LINF
        if self is NormKind.LINF:
            return NormKind.L1
        return NormKind.L2

    @classmethod
    def parse(cls, text: str) -> "NormKind":
        key = str(text).strip().lower()
        aliases = {
            "1": cls.L1, "l1": cls.L1,
            "2": cls.L2, "l2": cls.L2,
            "inf": cls.LINF, "linf": cls.LINF, "infinity": cls.LINF,
        }
        if key not in aliases:
            raise ValueError(f"unknown norm kind: {text!r}")
        return aliases[key]


def as_vec(values) -> np.ndarray:
    """Coerce to a finite 1-D float array."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains NaN/Inf")
    return v


def as_mat(values) -> np.ndarray:
    """Coerce to a finite 2-D float array."""
    a = np.asarray(values, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN/Inf")
    return a


def vec_norm(v, r: NormKind) -> float:
    v = as_vec(v)
    if r is NormKind.L1:
        return float(np.sum(np.abs(v)))
    if r is NormKind.L2:
        return float(np.sqrt(np.dot(v, v)))
    return float(np.max(np.abs(v))) if v.size else 0.0


def dual_norm_maximizer(g, r: NormKind) -> np.ndarray:
    """Unit-r vector h maximizing <g, h>, so <g, h> = ||g||_s with s dual to r.

    For r=L1 the maximizer is a signed basis vector at the largest |g_k|;
    ties break to the lowest index.  A zero gradient returns the zero vector
    (callers treat that as a stalled step).
    """
    g = as_vec(g)
    if not np.any(g):
        return np.zeros_like(g)
    if r is NormKind.LINF:
        return np.sign(g)
    if r is NormKind.L2:
        return g / vec_norm(g, NormKind.L2)
    k = int(np.argmax(np.abs(g)))  # np.argmax already takes the lowest index
    h = np.zeros_like(g)
    h[k] = np.sign(g[k])
    return h


def _project_l1_ball(w: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto {z : ||z||_1 <= radius} (sort-based method)."""
    if np.sum(np.abs(w)) <= radius:
        return w.copy()
    if radius <= 0.0:
        return np.zeros_like(w)
    u = np.sort(np.abs(w))[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, w.size + 1)
    rho = np.nonzero(u * ks > css - radius)[0][-1]
    theta = (css[rho] - radius) / float(rho + 1)
    return np.sign(w) * np.maximum(np.abs(w) - theta, 0.0)


def project_ball(xi, anchor, radius: float, r: NormKind) -> np.ndarray:
    """Euclidean (L2-objective) projection of xi onto {z : ||z-anchor||_r <= radius}."""
    xi = as_vec(xi)
    anchor = as_vec(anchor)
    if xi.shape != anchor.shape:
        raise ValueError("xi and anchor must have the same dimension")
    if radius < 0.0:
        raise ValueError("radius must be nonnegative")
    w = xi - anchor
    if r is NormKind.LINF:
        return anchor + np.clip(w, -radius, radius)
    if r is NormKind.L2:
        nrm = vec_norm(w, NormKind.L2)
        if nrm <= radius:
            return xi.copy()
        return anchor + w * (radius / nrm)
    return anchor + _project_l1_ball(w, radius)


def _spectral_norm_power(a: np.ndarray) -> float:
    """Largest singular value via power iteration on A^T A, seeded restarts."""
    n = a.shape[1]
    if n == 0 or a.shape[0] == 0 or not np.any(a):
        return 0.0
    gram = a.T @ a
    rng = np.random.default_rng(0)
    best = 0.0
    for _ in range(_POWER_ITER_RESTARTS):
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
        sigma = 0.0
        for _ in range(_POWER_ITER_MAX):
            w = gram @ v
            nw = np.linalg.norm(w)
            if nw == 0.0:
                break
            v = w / nw
            new_sigma = float(np.linalg.norm(a @ v))
            if abs(new_sigma - sigma) <= _POWER_ITER_RTOL * max(new_sigma, 1e-300):
                sigma = new_sigma
                break
            sigma = new_sigma
        best = max(best, sigma)
    return best


def _max_over_sign_vertices(a: np.ndarray, s: NormKind) -> float:
    """Exact ||A||_{inf->s} = max over the 2^n vertices u in {-1,1}^n of ||Au||_s."""
    n = a.shape[1]
    if n > SIGN_VERTEX_CAP:
        raise DimensionTooLarge(
            f"LInf-source operator norm needs 2^{n} vertices; cap is 2^{SIGN_VERTEX_CAP}"
        )
    best = 0.0
    # Fixing the first coordinate to +1 halves the work (||A(-u)||=||Au||).
    for signs in itertools.product((1.0, -1.0), repeat=max(n - 1, 0)):
        u = np.array((1.0,) + signs)
        best = max(best, vec_norm(a @ u, s))
    return best


def op_norm(A, r: NormKind, s: NormKind) -> float:
    """Induced operator norm sup_{||u||_r = 1} ||Au||_s.

    Closed forms cover L1-source (max column s-norm) and LInf-target (max row
    dual-r norm); L2->L2 uses power iteration; the remaining pairs (source
    LInf, or 2->1) reduce to an exact maximization over sign vertices, capped
    at 2^24 points.  Within the cap, LInf-source always uses the enumeration
    so the result agrees bit for bit with a full sign sweep.
    """
    a = as_mat(A)
    if a.size == 0:
        return 0.0
    if r is NormKind.L1:
        return max(vec_norm(a[:, j], s) for j in range(a.shape[1]))
    if r is NormKind.LINF and a.shape[1] <= SIGN_VERTEX_CAP:
        # Prefer the enumeration within the cap: it is exact bit for bit,
        # including the inf->inf pair where a row closed form also exists.
        return _max_over_sign_vertices(a, s)
    if s is NormKind.LINF:
        rd = r.dual()
        return max(vec_norm(a[i, :], rd) for i in range(a.shape[0]))
    if r is NormKind.L2 and s is NormKind.L2:
        return _spectral_norm_power(a)
    if r is NormKind.LINF:
        return _max_over_sign_vertices(a, s)
    # r=L2, s=L1: ||A||_{2->1} = max over sign vectors sigma of ||A^T sigma||_2,
    # enumerated over the output dimension.
    m = a.shape[0]
    if m > SIGN_VERTEX_CAP:
        raise DimensionTooLarge(
            f"2->1 operator norm needs 2^{m} sign vectors; cap is 2^{SIGN_VERTEX_CAP}"
        )
    best = 0.0
    for signs in itertools.product((1.0, -1.0), repeat=max(m - 1, 0)):
        sigma = np.array((1.0,) + signs)
        best = max(best, vec_norm(a.T @ sigma, NormKind.L2))
    return best
