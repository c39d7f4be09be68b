"""Natural-gradient targets on feature manifolds.

The natural gradient of the KL divergence toward a target sample, taken in
the natural parameters of the family spanned by a feature map, is the feature
covariance inverse applied to the gap between target and model feature means.
For the Gaussian quadratic family the update can additionally be carried out
exactly in closed-form natural coordinates; ``exact_ngd_step`` does that and
serves as the parametric reference trajectory for particle flows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import chol_solve, chol_spd, is_spd
from ._rng import as_generator
from .errors import StepFailureError
from .manifold import (
    FeatureMap,
    FisherMatrix,
    GaussianQuadraticMap,
    feature_mean,
    fisher_estimate,
    vech_pairs,
)
from .particles import ParticleSet


@dataclass(frozen=True)
class NatGradResult:
    """Feature-mean gap, the Fisher estimate used, and their solve."""

    gap: np.ndarray
    fisher: FisherMatrix
    natural_direction: np.ndarray


def natural_gradient_kl(
    fmap: FeatureMap,
    targets: ParticleSet,
    particles: ParticleSet,
    jitter: float = 1e-6,
) -> NatGradResult:
    """Monte Carlo natural gradient of KL(target || model) in natural coordinates.

    ``gap`` is the target minus model feature mean and ``natural_direction``
    is the Fisher solve of that gap.
    """
    if targets.dim != particles.dim:
        raise ValueError(f"dimension mismatch: targets {targets.dim}, particles {particles.dim}")
    fisher = fisher_estimate(fmap, particles, jitter)
    gap = feature_mean(fmap, targets) - feature_mean(fmap, particles)
    return NatGradResult(gap=gap, fisher=fisher, natural_direction=fisher.solve(gap))


@dataclass(frozen=True)
class GaussianNaturalParams:
    """Natural parameters of a full-covariance Gaussian.

    ``linear`` multiplies ``x`` and ``quadratic`` multiplies ``x x^T`` in the
    log density; ``-2 * quadratic`` must stay positive definite.
    """

    linear: np.ndarray
    quadratic: np.ndarray

    def __post_init__(self):
        lin = np.array(self.linear, dtype=np.float64).ravel()
        quad = np.asarray(self.quadratic, dtype=np.float64)
        if quad.shape != (lin.size, lin.size):
            raise ValueError(f"quadratic shape {quad.shape} does not match linear size {lin.size}")
        quad = 0.5 * (quad + quad.T)
        lin.setflags(write=False)
        quad.setflags(write=False)
        object.__setattr__(self, "linear", lin)
        object.__setattr__(self, "quadratic", quad)

    @property
    def dim(self) -> int:
        return self.linear.size


def gaussian_moment_to_natural(mean, cov) -> GaussianNaturalParams:
    """Convert moment parameters (mean, covariance) to natural parameters."""
    mean = np.asarray(mean, dtype=np.float64).ravel()
    cov = np.asarray(cov, dtype=np.float64)
    try:
        _, lower, _ = chol_spd(cov, 0.0)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance must be positive definite") from exc
    precision = chol_solve(lower, np.eye(mean.size))
    precision = 0.5 * (precision + precision.T)
    return GaussianNaturalParams(linear=precision @ mean, quadratic=-0.5 * precision)


def gaussian_natural_to_moment(params: GaussianNaturalParams) -> tuple[np.ndarray, np.ndarray]:
    """Convert natural parameters back to (mean, covariance)."""
    precision = -2.0 * params.quadratic
    try:
        _, lower, _ = chol_spd(precision, 0.0)
    except np.linalg.LinAlgError as exc:
        raise ValueError("natural parameters are outside the Gaussian domain") from exc
    cov = chol_solve(lower, np.eye(params.dim))
    cov = 0.5 * (cov + cov.T)
    return cov @ params.linear, cov


def sample_gaussian(mean, cov, n: int, seed) -> np.ndarray:
    """Draw ``n`` points from N(mean, cov), deterministic in the seed."""
    mean = np.asarray(mean, dtype=np.float64).ravel()
    cov = np.asarray(cov, dtype=np.float64)
    try:
        _, lower, _ = chol_spd(cov, 0.0)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance must be positive definite") from exc
    rng = as_generator(seed)
    z = rng.standard_normal((int(n), mean.size))
    return mean + z @ lower.T


def _pack_theta(params: GaussianNaturalParams) -> np.ndarray:
    """Flatten natural parameters into quadratic-feature coordinates.

    The layout matches ``GaussianQuadraticMap``: linear part first, then the
    row-major upper triangle of the quadratic part with off-diagonal entries
    doubled (each product feature ``x_i x_j`` with ``i != j`` absorbs both
    symmetric matrix entries).
    """
    d = params.dim
    quad = params.quadratic
    tail = np.array(
        [quad[i, j] if i == j else 2.0 * quad[i, j] for i, j in vech_pairs(d)]
    )
    return np.concatenate([params.linear, tail])


def _unpack_theta(theta: np.ndarray, dim: int) -> GaussianNaturalParams:
    lin = theta[:dim]
    quad = np.zeros((dim, dim))
    for idx, (i, j) in enumerate(vech_pairs(dim)):
        val = theta[dim + idx]
        if i == j:
            quad[i, i] = val
        else:
            quad[i, j] = quad[j, i] = 0.5 * val
    return GaussianNaturalParams(linear=lin, quadratic=quad)


def exact_ngd_step(
    params: GaussianNaturalParams,
    targets: ParticleSet,
    step: float,
    mc_samples: int = 4096,
    seed=0,
    jitter: float = 1e-6,
) -> GaussianNaturalParams:
    """One natural-gradient step on the Gaussian family in natural coordinates.

    The Fisher solve is estimated from ``mc_samples`` fresh model draws.  If
    the full step leaves the Gaussian domain the step is halved, up to 10
    times, before raising ``StepFailureError``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    mean, cov = gaussian_natural_to_moment(params)
    draws = sample_gaussian(mean, cov, mc_samples, seed)
    model_particles = ParticleSet(draws)
    fmap = GaussianQuadraticMap(params.dim)
    result = natural_gradient_kl(fmap, targets, model_particles, jitter)
    theta = _pack_theta(params)
    for halving in range(11):
        candidate = _unpack_theta(
            theta + (step / 2**halving) * result.natural_direction, params.dim
        )
        if is_spd(-2.0 * candidate.quadratic):
            return candidate
    raise StepFailureError("natural-gradient step left the Gaussian domain after 10 halvings")
