"""Kernels used by the drift solvers.

Three kinds are supported:

* ``rbf_scalar`` - the Gaussian kernel; its mixed second derivative matrix
  feeds the curvature-aware drift path.
* ``diagonalized_scalar`` - a Gaussian kernel applied as ``k(x, y) * I``,
  used where the drift construction replaces the mixed derivative block
  with a scalar kernel times the identity.
* ``empirical_ntk`` - the matrix-valued tangent kernel of a randomly
  initialized one-hidden-layer tanh network, evaluated in closed form.

``median_heuristic`` provides the default bandwidth rule: the median of all
pairwise Euclidean distances of the pooled points.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from ._rng import as_generator
from .particles import ParticleSet

RBF_SCALAR = "rbf_scalar"
DIAGONALIZED_SCALAR = "diagonalized_scalar"
EMPIRICAL_NTK = "empirical_ntk"
KERNEL_KINDS = (RBF_SCALAR, DIAGONALIZED_SCALAR, EMPIRICAL_NTK)


@dataclass(frozen=True)
class NtkSpec:
    """Frozen random one-hidden-layer tanh network defining a tangent kernel.

    Weights are drawn once from the seed with variance ``1/fan_in`` and the
    kernel is the Gram matrix of network-output gradients with respect to all
    weights and biases, summed in closed form over the hidden layer.
    """

    input_dim: int
    hidden_width: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_width < 1:
            raise ValueError("input_dim and hidden_width must be positive")
        rng = as_generator(self.seed)
        d, h = self.input_dim, self.hidden_width
        w1 = rng.normal(0.0, 1.0 / np.sqrt(d), size=(h, d))
        b1 = rng.normal(0.0, 1.0 / np.sqrt(d), size=h)
        w2 = rng.normal(0.0, 1.0 / np.sqrt(h), size=(d, h))
        b2 = rng.normal(0.0, 1.0 / np.sqrt(h), size=d)
        for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def activations(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Hidden activations and their derivatives: ``tanh(pre)``, ``1 - tanh^2``."""
        act = np.tanh(pts @ self.w1.T + self.b1)
        return act, 1.0 - act**2


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus its parameters.

    ``bandwidth=None`` on the scalar kinds means "resolve by the median
    heuristic at solve time"; the drift solvers do that resolution.
    """

    kind: str
    bandwidth: float | None = None
    ntk: NtkSpec | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind: {self.kind!r}")
        if self.kind == EMPIRICAL_NTK:
            if self.ntk is None:
                raise ValueError("empirical_ntk kernel needs an NtkSpec")
            if self.bandwidth is not None:
                raise ValueError("empirical_ntk kernel takes no bandwidth")
        else:
            if self.ntk is not None:
                raise ValueError(f"{self.kind} kernel takes no NtkSpec")
            if self.bandwidth is not None and self.bandwidth <= 0:
                raise ValueError("bandwidth must be positive")

    def with_bandwidth(self, bandwidth: float) -> "KernelSpec":
        return KernelSpec(kind=self.kind, bandwidth=float(bandwidth), ntk=self.ntk)

    def to_config(self) -> dict:
        cfg = {"kind": self.kind}
        if self.kind == EMPIRICAL_NTK:
            cfg["input_dim"] = self.ntk.input_dim
            cfg["hidden_width"] = self.ntk.hidden_width
            cfg["seed"] = self.ntk.seed
        else:
            cfg["bandwidth"] = self.bandwidth
        return cfg

    @staticmethod
    def from_config(cfg: dict) -> "KernelSpec":
        kind = cfg.get("kind")
        if kind == EMPIRICAL_NTK:
            ntk = NtkSpec(
                input_dim=int(cfg["input_dim"]),
                hidden_width=int(cfg.get("hidden_width", 64)),
                seed=int(cfg.get("seed", 0)),
            )
            return KernelSpec(kind=kind, ntk=ntk)
        bw = cfg.get("bandwidth")
        return KernelSpec(kind=kind, bandwidth=None if bw is None else float(bw))


def rbf_kernel(bandwidth: float | None = None) -> KernelSpec:
    return KernelSpec(kind=RBF_SCALAR, bandwidth=bandwidth)


def diagonalized_kernel(bandwidth: float | None = None) -> KernelSpec:
    return KernelSpec(kind=DIAGONALIZED_SCALAR, bandwidth=bandwidth)


def ntk_kernel(input_dim: int, hidden_width: int = 64, seed: int = 0) -> KernelSpec:
    return KernelSpec(
        kind=EMPIRICAL_NTK,
        ntk=NtkSpec(input_dim=input_dim, hidden_width=hidden_width, seed=seed),
    )


def _as_points(x) -> np.ndarray:
    if isinstance(x, ParticleSet):
        return x.points
    arr = np.asarray(x, dtype=np.float64)
    return arr[:, None] if arr.ndim == 1 else arr


def _require_bandwidth(spec: KernelSpec) -> float:
    if spec.bandwidth is None:
        raise ValueError("kernel bandwidth is unresolved; pass one or use the median heuristic")
    return spec.bandwidth


def kernel_value(spec: KernelSpec, x, y) -> float:
    """Scalar kernel value ``k(x, y)`` for the scalar kinds."""
    if spec.kind == EMPIRICAL_NTK:
        raise ValueError("empirical_ntk is matrix valued; use ntk_value")
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    s2 = _require_bandwidth(spec) ** 2
    return float(np.exp(-np.sum((x - y) ** 2) / (2.0 * s2)))


def kernel_gram(spec: KernelSpec, xs, ys) -> np.ndarray:
    """Scalar Gram matrix ``k(x_i, y_j)`` for the scalar kinds."""
    if spec.kind == EMPIRICAL_NTK:
        raise ValueError("empirical_ntk is matrix valued; use ntk_gram_blocks")
    xs, ys = _as_points(xs), _as_points(ys)
    if xs.shape[1] != ys.shape[1]:
        raise ValueError(f"dimension mismatch: {xs.shape} vs {ys.shape}")
    s2 = _require_bandwidth(spec) ** 2
    sq = np.sum(xs**2, axis=1)[:, None] + np.sum(ys**2, axis=1)[None, :] - 2.0 * xs @ ys.T
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * s2))


def kernel_cross_grad(spec: KernelSpec, x, y) -> np.ndarray:
    """Mixed second derivative ``d^2 k / dx dy`` of the Gaussian kernel.

    Only defined for ``rbf_scalar``: the diagonalized kind substitutes
    ``k * I`` directly inside the drift solver instead of differentiating,
    and the tangent kernel is already matrix valued.
    """
    if spec.kind != RBF_SCALAR:
        raise ValueError(f"cross gradient is only defined for {RBF_SCALAR}, got {spec.kind}")
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    s2 = _require_bandwidth(spec) ** 2
    diff = x - y
    k = np.exp(-np.sum(diff**2) / (2.0 * s2))
    return k * (np.eye(x.shape[0]) / s2 - np.outer(diff, diff) / s2**2)


def ntk_value(spec: NtkSpec, x, y) -> np.ndarray:
    """Matrix tangent-kernel block ``K(x, y)`` of shape ``(d, d)``."""
    blocks = ntk_gram_blocks(spec, np.atleast_2d(x), np.atleast_2d(y))
    return blocks[0, 0]


def ntk_gram_blocks(spec: NtkSpec, xs, ys) -> np.ndarray:
    """All pairwise tangent-kernel blocks, shape ``(n, m, d, d)``.

    For hidden activations ``a`` and their derivatives ``a'`` the block is
    ``(a(x) . a(y) + 1) I + (x . y + 1) W2 diag(a'(x) a'(y)) W2^T`` where the
    two rank structures come from the output-layer and input-layer weight
    gradients respectively (biases supply the ``+1`` terms).
    """
    xs, ys = _as_points(xs), _as_points(ys)
    d = spec.input_dim
    if xs.shape[1] != d or ys.shape[1] != d:
        raise ValueError(f"points must have dimension {d}")
    ax, apx = spec.activations(xs)
    ay, apy = spec.activations(ys)
    out_layer = ax @ ay.T + 1.0
    in_layer = xs @ ys.T + 1.0
    n, m = xs.shape[0], ys.shape[0]
    blocks = out_layer[:, :, None, None] * np.eye(d)
    # sum_h a'(x)_h a'(y)_h w2_h w2_h^T, scaled by (x.y + 1)
    w2 = spec.w2  # (d, h)
    mixed = np.einsum("nh,mh,dh,eh->nmde", apx, apy, w2, w2, optimize=True)
    blocks = blocks + in_layer[:, :, None, None] * mixed
    return blocks


def median_heuristic(points_a, points_b=None) -> float:
    """Median pairwise Euclidean distance over the pooled points.

    Falls back to the smallest nonzero distance when the median is zero, and
    to 1.0 when every pairwise distance is zero.
    """
    pool = _as_points(points_a)
    if points_b is not None:
        other = _as_points(points_b)
        if other.shape[1] != pool.shape[1]:
            raise ValueError(f"dimension mismatch: {pool.shape} vs {other.shape}")
        pool = np.vstack([pool, other])
    if pool.shape[0] < 2:
        raise ValueError("median heuristic needs at least 2 pooled points")
    dists = pdist(pool)
    med = float(np.median(dists))
    if med > 0:
        return med
    nonzero = dists[dists > 0]
    return float(nonzero.min()) if nonzero.size else 1.0
