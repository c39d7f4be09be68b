"""Feature maps defining exponential-family manifolds over particle states.

A feature map sends a point in ``R^d`` to a feature vector in ``R^m``; the
span of those features (as log-density coordinates) is the model family that
flows and projections operate on.  Every map exposes analytic first and
second derivatives, which the drift solvers and limit projections consume.

Maps are immutable and JSON-serializable via ``to_config`` /
``feature_map_from_config``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import chol_solve, chol_spd
from ._rng import as_generator
from .errors import SingularFisherError
from .particles import ParticleSet


class FeatureMap:
    """Base class for feature maps.

    Subclasses implement ``_features``, ``_jacobian`` and ``_hessian`` on
    ``(n, input_dim)`` batches; the public methods accept a single point or a
    batch and return matching shapes.
    """

    kind: str = ""
    input_dim: int
    feature_dim: int

    # -- public API ---------------------------------------------------------
    def features(self, x) -> np.ndarray:
        """Feature vector(s): ``(feature_dim,)`` for a point, ``(n, feature_dim)`` for a batch."""
        pts, single = self._prepare(x)
        out = self._features(pts)
        return out[0] if single else out

    def jacobian(self, x) -> np.ndarray:
        """Stacked feature gradients: ``(feature_dim, input_dim)`` per point."""
        pts, single = self._prepare(x)
        out = self._jacobian(pts)
        return out[0] if single else out

    def hessian(self, x) -> np.ndarray:
        """Per-feature Hessians: ``(feature_dim, input_dim, input_dim)`` per point."""
        pts, single = self._prepare(x)
        out = self._hessian(pts)
        return out[0] if single else out

    def to_config(self) -> dict:
        raise NotImplementedError

    # -- subclass hooks ------------------------------------------------------
    def _features(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _jacobian(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _hessian(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _prepare(self, x) -> tuple[np.ndarray, bool]:
        if isinstance(x, ParticleSet):
            if x.dim != self.input_dim:
                raise ValueError(
                    f"expected points of dimension {self.input_dim}, got {x.dim}"
                )
            return x.points, False
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1
        pts = arr[None, :] if single else arr
        if pts.ndim != 2 or pts.shape[1] != self.input_dim:
            raise ValueError(
                f"expected points of dimension {self.input_dim}, got shape {arr.shape}"
            )
        return pts, single


def vech_pairs(dim: int) -> list[tuple[int, int]]:
    """Row-major upper-triangle index pairs (0,0), (0,1), ..., (d-1,d-1)."""
    return [(i, j) for i in range(dim) for j in range(i, dim)]


@dataclass(frozen=True)
class GaussianQuadraticMap(FeatureMap):
    """Linear plus quadratic monomials: the Gaussian family.

    Features are ``[x_1, ..., x_d]`` followed by the products ``x_i * x_j``
    over the upper triangle in row-major order, so for ``d = 2`` the vector is
    ``[x_1, x_2, x_1^2, x_1 x_2, x_2^2]``.
    """

    input_dim: int
    kind = "gaussian_quadratic"

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")

    @property
    def feature_dim(self) -> int:
        d = self.input_dim
        return d + d * (d + 1) // 2

    def _features(self, pts):
        iu = np.triu_indices(self.input_dim)
        prods = pts[:, :, None] * pts[:, None, :]
        return np.concatenate([pts, prods[:, iu[0], iu[1]]], axis=1)

    def _jacobian(self, pts):
        n, d = pts.shape
        jac = np.zeros((n, self.feature_dim, d))
        jac[:, :d, :] = np.eye(d)
        for row, (i, j) in enumerate(vech_pairs(d), start=d):
            jac[:, row, i] += pts[:, j]
            jac[:, row, j] += pts[:, i]
        return jac

    def _hessian(self, pts):
        n, d = pts.shape
        hess = np.zeros((n, self.feature_dim, d, d))
        for row, (i, j) in enumerate(vech_pairs(d), start=d):
            hess[:, row, i, j] += 1.0
            hess[:, row, j, i] += 1.0
        return hess

    def to_config(self):
        return {"kind": self.kind, "input_dim": self.input_dim}

    @staticmethod
    def from_config(cfg: dict) -> "GaussianQuadraticMap":
        return GaussianQuadraticMap(input_dim=int(cfg["input_dim"]))


@dataclass(frozen=True)
class RbfFeatureMap(FeatureMap):
    """Gaussian bumps centered at fixed anchor points."""

    centers: np.ndarray
    bandwidth: float
    kind = "rbf_features"

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        if centers.ndim == 1:
            centers = centers[:, None]
        if centers.ndim != 2 or centers.shape[0] == 0:
            raise ValueError(f"centers must be a nonempty (m, d) array, got shape {centers.shape}")
        centers = centers.copy()
        centers.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")

    @property
    def input_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.centers.shape[0]

    def _diffs(self, pts):
        # diffs[i, r] = center_r - x_i
        return self.centers[None, :, :] - pts[:, None, :]

    def _features(self, pts):
        diffs = self._diffs(pts)
        sq = np.sum(diffs**2, axis=2)
        return np.exp(-sq / (2.0 * self.bandwidth**2))

    def _jacobian(self, pts):
        diffs = self._diffs(pts)
        vals = np.exp(-np.sum(diffs**2, axis=2) / (2.0 * self.bandwidth**2))
        return vals[:, :, None] * diffs / self.bandwidth**2

    def _hessian(self, pts):
        diffs = self._diffs(pts)
        vals = np.exp(-np.sum(diffs**2, axis=2) / (2.0 * self.bandwidth**2))
        s2 = self.bandwidth**2
        outer = np.einsum("nrd,nre->nrde", diffs, diffs) / s2**2
        eye = np.eye(self.input_dim) / s2
        return vals[:, :, None, None] * (outer - eye)

    def to_config(self):
        return {
            "kind": self.kind,
            "centers": self.centers.tolist(),
            "bandwidth": self.bandwidth,
        }

    @staticmethod
    def from_config(cfg: dict) -> "RbfFeatureMap":
        return RbfFeatureMap(
            centers=np.asarray(cfg["centers"], dtype=np.float64),
            bandwidth=float(cfg["bandwidth"]),
        )


@dataclass(frozen=True)
class InformedPairwiseMap(FeatureMap):
    """RBF features augmented with selected coordinate products ``x_i * x_j``.

    The product features inject known interaction structure (for instance the
    edges of a graphical model) into an otherwise nonparametric family.
    """

    centers: np.ndarray
    bandwidth: float
    pairs: tuple[tuple[int, int], ...]
    kind = "informed_pairwise"

    def __post_init__(self):
        rbf = RbfFeatureMap(self.centers, self.bandwidth)
        object.__setattr__(self, "centers", rbf.centers)
        object.__setattr__(self, "bandwidth", rbf.bandwidth)
        pairs = tuple((int(i), int(j)) for i, j in self.pairs)
        for i, j in pairs:
            if not (0 <= i < self.input_dim and 0 <= j < self.input_dim):
                raise ValueError(f"pair ({i}, {j}) out of range for dimension {self.input_dim}")
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "_rbf", rbf)

    @property
    def input_dim(self) -> int:
        return self.centers.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.centers.shape[0] + len(self.pairs)

    def _features(self, pts):
        rbf = self._rbf._features(pts)
        prods = np.stack([pts[:, i] * pts[:, j] for i, j in self.pairs], axis=1) \
            if self.pairs else np.zeros((pts.shape[0], 0))
        return np.concatenate([rbf, prods], axis=1)

    def _jacobian(self, pts):
        n, d = pts.shape
        jac_pairs = np.zeros((n, len(self.pairs), d))
        for row, (i, j) in enumerate(self.pairs):
            jac_pairs[:, row, i] += pts[:, j]
            jac_pairs[:, row, j] += pts[:, i]
        return np.concatenate([self._rbf._jacobian(pts), jac_pairs], axis=1)

    def _hessian(self, pts):
        n, d = pts.shape
        hess_pairs = np.zeros((n, len(self.pairs), d, d))
        for row, (i, j) in enumerate(self.pairs):
            hess_pairs[:, row, i, j] += 1.0
            hess_pairs[:, row, j, i] += 1.0
        return np.concatenate([self._rbf._hessian(pts), hess_pairs], axis=1)

    def to_config(self):
        return {
            "kind": self.kind,
            "centers": self.centers.tolist(),
            "bandwidth": self.bandwidth,
            "pairs": [list(p) for p in self.pairs],
        }

    @staticmethod
    def from_config(cfg: dict) -> "InformedPairwiseMap":
        return InformedPairwiseMap(
            centers=np.asarray(cfg["centers"], dtype=np.float64),
            bandwidth=float(cfg["bandwidth"]),
            pairs=tuple((int(i), int(j)) for i, j in cfg["pairs"]),
        )


@dataclass(frozen=True)
class CustomLinearMap(FeatureMap):
    """Fixed linear features ``x -> W x``."""

    weight: np.ndarray
    kind = "custom_linear"

    def __post_init__(self):
        weight = np.atleast_2d(np.asarray(self.weight, dtype=np.float64)).copy()
        weight.setflags(write=False)
        object.__setattr__(self, "weight", weight)

    @property
    def input_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.weight.shape[0]

    def _features(self, pts):
        return pts @ self.weight.T

    def _jacobian(self, pts):
        return np.broadcast_to(
            self.weight, (pts.shape[0], *self.weight.shape)
        ).copy()

    def _hessian(self, pts):
        n, d = pts.shape
        return np.zeros((n, self.feature_dim, d, d))

    def to_config(self):
        return {"kind": self.kind, "weight": self.weight.tolist()}

    @staticmethod
    def from_config(cfg: dict) -> "CustomLinearMap":
        return CustomLinearMap(weight=np.asarray(cfg["weight"], dtype=np.float64))


_REGISTRY: dict[str, callable] = {
    GaussianQuadraticMap.kind: GaussianQuadraticMap.from_config,
    RbfFeatureMap.kind: RbfFeatureMap.from_config,
    InformedPairwiseMap.kind: InformedPairwiseMap.from_config,
    CustomLinearMap.kind: CustomLinearMap.from_config,
}


def register_feature_map(kind: str, from_config) -> None:
    """Register a deserializer for an externally defined feature-map kind."""
    _REGISTRY[kind] = from_config


def feature_map_from_config(cfg: dict) -> FeatureMap:
    """Rebuild a feature map from its ``to_config`` dictionary."""
    kind = cfg.get("kind")
    if kind not in _REGISTRY:
        raise ValueError(f"unknown feature map kind: {kind!r}")
    return _REGISTRY[kind](cfg)


@dataclass(frozen=True)
class FisherMatrix:
    """Feature covariance with its Cholesky factor and the jitter applied."""

    matrix: np.ndarray
    chol_lower: np.ndarray
    jitter_applied: float

    def solve(self, b: np.ndarray) -> np.ndarray:
        return chol_solve(self.chol_lower, b)


def feature_mean(fmap: FeatureMap, particles: ParticleSet) -> np.ndarray:
    """Empirical mean of the features over a particle set."""
    return fmap.features(particles.points).mean(axis=0)


def fisher_estimate(
    fmap: FeatureMap, particles: ParticleSet, jitter: float = 1e-6
) -> FisherMatrix:
    """Empirical feature covariance, diagonally loaded until factorizable.

    The load is ``jitter`` relative to the mean diagonal of the raw
    covariance (absolute when the trace vanishes), escalated by factors of 10
    on failure; past the escalation cap a ``SingularFisherError`` is raised.
    """
    if particles.n < 2:
        raise ValueError("fisher_estimate needs at least 2 particles")
    feats = fmap.features(particles.points)
    centered = feats - feats.mean(axis=0)
    cov = centered.T @ centered / particles.n
    try:
        loaded, lower, applied = chol_spd(cov, jitter)
    except np.linalg.LinAlgError as exc:
        raise SingularFisherError(
            f"feature covariance ({fmap.kind}) not positive definite after jitter escalation"
        ) from exc
    return FisherMatrix(matrix=loaded, chol_lower=lower, jitter_applied=applied)


def rbf_map_from_samples(
    samples: ParticleSet,
    n_centers: int = 50,
    bandwidth: float | None = None,
    bandwidth_samples: ParticleSet | None = None,
    bandwidth_scale: float = 1.0,
    seed=0,
) -> RbfFeatureMap:
    """Build an RBF map with centers drawn from ``samples`` without replacement.

    When ``bandwidth`` is None it is set by the median pairwise-distance
    heuristic over ``bandwidth_samples`` (default: ``samples``) times
    ``bandwidth_scale``; an explicit ``bandwidth`` is used as given.
    """
    from .kernels import median_heuristic

    rng = as_generator(seed)
    n = samples.n
    k = min(int(n_centers), n)
    idx = rng.choice(n, size=k, replace=False)
    centers = samples.points[np.sort(idx)]
    if bandwidth is None:
        pool = samples if bandwidth_samples is None else bandwidth_samples
        bandwidth = float(bandwidth_scale) * median_heuristic(pool)
    return RbfFeatureMap(centers=centers, bandwidth=bandwidth)
