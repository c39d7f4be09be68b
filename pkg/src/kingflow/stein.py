"""Stein features: zero-mean statistics built from a known target score.

Applying the score operator ``f -> s_c(x) f(x) + d f / d x_c`` to base
features produces statistics whose expectation under the score's density is
zero.  Flows on the resulting manifold therefore need no target samples: the
feature-mean gap reduces to the negated model feature mean, and its Fisher
solve is the sampling analogue of the natural gradient.

Each base feature ``i`` is paired with coordinate ``c = i mod d`` by default;
``mode="full"`` instead crosses every feature with every coordinate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .manifold import (
    FeatureMap,
    feature_map_from_config,
    feature_mean,
    fisher_estimate,
    register_feature_map,
)
from .ngd import NatGradResult
from .particles import ParticleSet
from ._rng import as_generator

STEIN_MODES = ("paired", "full")


@dataclass(frozen=True)
class GaussianScore:
    """Score of a diagonal-covariance Gaussian."""

    mean: np.ndarray
    variances: np.ndarray
    kind = "gaussian"

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).ravel()
        variances = np.array(self.variances, dtype=np.float64).ravel()
        if variances.shape != mean.shape:
            raise ValueError("mean and variances must have the same length")
        if np.any(variances <= 0):
            raise ValueError("variances must be positive")
        mean.setflags(write=False)
        variances.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variances", variances)

    @property
    def dim(self) -> int:
        return self.mean.size

    def score(self, pts: np.ndarray) -> np.ndarray:
        return (self.mean - pts) / self.variances

    def score_jacobian(self, pts: np.ndarray) -> np.ndarray:
        jac = -np.diag(1.0 / self.variances)
        return np.broadcast_to(jac, (pts.shape[0], self.dim, self.dim)).copy()

    def sample(self, n: int, seed) -> np.ndarray:
        rng = as_generator(seed)
        return self.mean + rng.standard_normal((n, self.dim)) * np.sqrt(self.variances)

    def to_config(self):
        return {"kind": self.kind, "mean": self.mean.tolist(), "variances": self.variances.tolist()}

    @staticmethod
    def from_config(cfg):
        return GaussianScore(mean=cfg["mean"], variances=cfg["variances"])


@dataclass(frozen=True)
class GaussianMixtureScore:
    """Score of an equal-weight isotropic Gaussian mixture."""

    means: np.ndarray
    sigma: float
    kind = "gaussian_mixture"

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64)).copy()
        means.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigma", float(self.sigma))
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def _responsibilities(self, pts):
        diffs = self.means[None, :, :] - pts[:, None, :]  # (n, k, d)
        logits = -np.sum(diffs**2, axis=2) / (2.0 * self.sigma**2)
        logits -= logits.max(axis=1, keepdims=True)
        resp = np.exp(logits)
        resp /= resp.sum(axis=1, keepdims=True)
        return resp, diffs

    def score(self, pts: np.ndarray) -> np.ndarray:
        resp, diffs = self._responsibilities(pts)
        return np.einsum("nk,nkd->nd", resp, diffs, optimize=True) / self.sigma**2

    def score_jacobian(self, pts: np.ndarray) -> np.ndarray:
        """Hessian of the mixture log density at each point."""
        resp, diffs = self._responsibilities(pts)
        comp = diffs / self.sigma**2  # per-component score (n, k, d)
        mean_comp = np.einsum("nk,nkd->nd", resp, comp, optimize=True)
        second = np.einsum("nk,nkd,nke->nde", resp, comp, comp, optimize=True)
        outer = np.einsum("nd,ne->nde", mean_comp, mean_comp)
        eye = np.eye(self.dim) / self.sigma**2
        return second - outer - eye

    def sample(self, n: int, seed) -> np.ndarray:
        rng = as_generator(seed)
        comps = rng.integers(0, self.means.shape[0], size=n)
        return self.means[comps] + rng.standard_normal((n, self.dim)) * self.sigma

    def to_config(self):
        return {"kind": self.kind, "means": self.means.tolist(), "sigma": self.sigma}

    @staticmethod
    def from_config(cfg):
        return GaussianMixtureScore(means=np.asarray(cfg["means"]), sigma=float(cfg["sigma"]))


_SCORE_KINDS = {
    GaussianScore.kind: GaussianScore.from_config,
    GaussianMixtureScore.kind: GaussianMixtureScore.from_config,
}


def score_from_config(cfg: dict):
    kind = cfg.get("kind")
    if kind not in _SCORE_KINDS:
        raise ValueError(f"unknown score kind: {kind!r}")
    return _SCORE_KINDS[kind](cfg)


@dataclass(frozen=True)
class SteinFeatureMap(FeatureMap):
    """Score-operator images of a base feature map."""

    base: FeatureMap
    target: object
    mode: str = "paired"
    kind = "stein"

    def __post_init__(self):
        if self.mode not in STEIN_MODES:
            raise ValueError(f"mode must be one of {STEIN_MODES}, got {self.mode!r}")
        if self.target.dim != self.base.input_dim:
            raise ValueError(
                f"score dimension {self.target.dim} does not match base input {self.base.input_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.base.input_dim

    @property
    def feature_dim(self) -> int:
        if self.mode == "paired":
            return self.base.feature_dim
        return self.base.feature_dim * self.input_dim

    def _coords(self) -> np.ndarray:
        b, d = self.base.feature_dim, self.input_dim
        if self.mode == "paired":
            return np.arange(b) % d
        return np.tile(np.arange(d), b)

    def _rows(self) -> np.ndarray:
        b, d = self.base.feature_dim, self.input_dim
        if self.mode == "paired":
            return np.arange(b)
        return np.repeat(np.arange(b), d)

    def _features(self, pts):
        feats = self.base.features(pts)
        jac = self.base.jacobian(pts)
        score = self.target.score(pts)
        rows, coords = self._rows(), self._coords()
        return score[:, coords] * feats[:, rows] + jac[:, rows, coords]

    def _jacobian(self, pts):
        feats = self.base.features(pts)
        jac = self.base.jacobian(pts)
        hess = self.base.hessian(pts)
        score = self.target.score(pts)
        score_jac = self.target.score_jacobian(pts)
        rows, coords = self._rows(), self._coords()
        # d/dx of s_c f_i + d f_i/dx_c, row by row:
        #   f_i * (ds_c/dx) + s_c * (df_i/dx) + (Hessian f_i)[c, :]
        return (
            feats[:, rows, None] * score_jac[:, coords, :]
            + score[:, coords, None] * jac[:, rows, :]
            + hess[:, rows, coords, :]
        )

    def _hessian(self, pts):
        raise NotImplementedError("second derivatives of Stein features are not provided")

    def to_config(self):
        return {
            "kind": self.kind,
            "base": self.base.to_config(),
            "score": self.target.to_config(),
            "mode": self.mode,
        }

    @staticmethod
    def from_config(cfg):
        return SteinFeatureMap(
            base=feature_map_from_config(cfg["base"]),
            target=score_from_config(cfg["score"]),
            mode=cfg.get("mode", "paired"),
        )


register_feature_map(SteinFeatureMap.kind, SteinFeatureMap.from_config)


def stein_natural_gradient(
    smap: SteinFeatureMap, particles: ParticleSet, jitter: float = 1e-6
) -> NatGradResult:
    """Natural gradient toward the score's density, using no target samples.

    Stein features have zero mean under the target, so the feature-mean gap
    is simply the negated model feature mean.
    """
    fisher = fisher_estimate(smap, particles, jitter)
    gap = -feature_mean(smap, particles)
    return NatGradResult(gap=gap, fisher=fisher, natural_direction=fisher.solve(gap))
