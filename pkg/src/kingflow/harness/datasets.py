"""Seeded synthetic datasets for the experiment scenarios."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._linalg import chol_solve, chol_spd, is_spd
from .._rng import as_generator
from ..ngd import sample_gaussian
from ..particles import ParticleSet, as_particles


def gen_gaussian_mixture(
    dim: int,
    means,
    weights,
    n: int,
    seed,
    component_sd: float = 1.0,
) -> ParticleSet:
    """Sample an isotropic Gaussian mixture by component-then-point draws.

    Scalar entries of ``means`` are broadcast to constant vectors.  Weights
    must be nonnegative and sum to 1 within 1e-8.
    """
    if dim < 1 or n < 1:
        raise ValueError("dim and n must be positive")
    if component_sd <= 0:
        raise ValueError("component_sd must be positive")
    centers = []
    for m in means:
        arr = np.asarray(m, dtype=np.float64)
        centers.append(np.full(dim, float(arr)) if arr.ndim == 0 else arr.ravel())
        if centers[-1].size != dim:
            raise ValueError(f"mean {m!r} does not have dimension {dim}")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.size != len(centers):
        raise ValueError("weights and means must have the same length")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-8:
        raise ValueError("weights must be nonnegative and sum to 1")
    rng = as_generator(seed)
    comps = rng.choice(len(centers), size=n, p=weights)
    pts = np.stack(centers)[comps] + component_sd * rng.standard_normal((n, dim))
    return ParticleSet(pts)


def gen_scurve(n: int, noise_sd: float = 0.0, seed=0) -> ParticleSet:
    """Points on an S-shaped 3-d curve sheet with optional Gaussian noise.

    Clean coordinates satisfy x in [-1, 1], y in [-2, 2], z in [0, 2].
    """
    if n < 1:
        raise ValueError("n must be positive")
    if noise_sd < 0:
        raise ValueError("noise_sd must be nonnegative")
    rng = as_generator(seed)
    u = rng.uniform(-1.5 * np.pi, 1.5 * np.pi, size=n)
    v = rng.uniform(0.0, 2.0, size=n)
    pts = np.stack([np.sin(u), np.sign(u) * (np.cos(u) - 1.0), v], axis=1)
    if noise_sd > 0:
        pts = pts + noise_sd * rng.standard_normal(pts.shape)
    return ParticleSet(pts)


@dataclass(frozen=True)
class GgmSpec:
    """A random sparse Gaussian graphical model.

    The precision matrix has unit diagonal, value ``edge_value`` on sampled
    edges, and is diagonally loaded (in steps of 0.05) until positive
    definite; loading never changes the edge support.
    """

    dim: int = 30
    edge_prob: float = 0.05
    edge_value: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be at least 2")
        if not 0.0 <= self.edge_prob <= 1.0:
            raise ValueError("edge_prob must lie in [0, 1]")
        rng = as_generator(self.seed)
        adj = np.zeros((self.dim, self.dim), dtype=bool)
        iu = np.triu_indices(self.dim, k=1)
        edges = rng.random(iu[0].size) < self.edge_prob
        adj[iu[0][edges], iu[1][edges]] = True
        adj |= adj.T
        precision = np.eye(self.dim) + self.edge_value * adj
        while not is_spd(precision):
            precision = precision + 0.05 * np.eye(self.dim)
        adj.setflags(write=False)
        precision.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        object.__setattr__(self, "precision", precision)

    @property
    def edges(self) -> list[tuple[int, int]]:
        iu = np.triu_indices(self.dim, k=1)
        mask = self.adjacency[iu]
        return [(int(i), int(j)) for i, j in zip(iu[0][mask], iu[1][mask])]

    @property
    def covariance(self) -> np.ndarray:
        _, lower, _ = chol_spd(self.precision, 0.0)
        inv_lower = np.linalg.inv(lower)
        cov = inv_lower.T @ inv_lower
        return 0.5 * (cov + cov.T)


def gen_ggm_samples(spec: GgmSpec, n: int, seed) -> ParticleSet:
    """Zero-mean samples from the graphical model."""
    return ParticleSet(sample_gaussian(np.zeros(spec.dim), spec.covariance, n, seed))


def rotate_dataset(points, degrees: float) -> ParticleSet:
    """Rotate the first two coordinates clockwise by ``degrees``.

    Positive angles turn (0, 1) toward (1, 0); remaining coordinates pass
    through unchanged.
    """
    pset = as_particles(points)
    if pset.dim < 2:
        raise ValueError("rotation needs at least 2 coordinates")
    angle = np.deg2rad(degrees)
    rot = np.array(
        [[np.cos(angle), np.sin(angle)], [-np.sin(angle), np.cos(angle)]]
    )
    out = pset.points.copy()
    out[:, :2] = pset.points[:, :2] @ rot.T
    return ParticleSet(out, pset.t)


def precision_support(points, threshold: float = 0.1) -> np.ndarray:
    """Off-diagonal support of the inverse sample covariance.

    Entry ``(i, j)`` is True when the fitted precision exceeds ``threshold``
    in absolute value; the diagonal is always False.
    """
    pts = as_particles(points).points
    n, d = pts.shape
    if n <= d:
        raise ValueError(f"need more than dim = {d} points, got {n}")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    centered = pts - pts.mean(axis=0)
    cov = centered.T @ centered / n
    trace = float(np.trace(cov))
    load = 1e-9 * (trace / d if trace > 0 else 1.0)
    try:
        _, lower, _ = chol_spd(cov + load * np.eye(d), 0.0)
    except np.linalg.LinAlgError as exc:
        raise ValueError("sample covariance is singular") from exc
    precision = chol_solve(lower, np.eye(d))
    precision = 0.5 * (precision + precision.T)
    support = np.abs(precision) > threshold
    np.fill_diagonal(support, False)
    return support
