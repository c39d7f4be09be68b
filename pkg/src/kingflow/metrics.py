"""Evaluation metrics: kernel MMD, Gaussian fits, Gaussian transport distance."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import chol_spd
from .kernels import median_heuristic
from .particles import ParticleSet, as_particles


@dataclass(frozen=True)
class MmdEstimate:
    """Biased (V-statistic) Gaussian-kernel MMD and the bandwidth it used."""

    value: float
    bandwidth: float


def mmd(sample_a, sample_b, bandwidth: float | None = None) -> MmdEstimate:
    """Gaussian-kernel MMD between two samples, as the biased V-statistic.

    With no bandwidth given, the median pairwise-distance heuristic over the
    pooled samples is used.  The squared estimate is clipped at zero before
    the square root.
    """
    a = as_particles(sample_a).points
    b = as_particles(sample_b).points
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if bandwidth is None:
        bandwidth = median_heuristic(a, b)
    elif bandwidth <= 0:
        raise ValueError("bandwidth must be positive")

    def _gram_mean(xs, ys):
        sq = (
            np.sum(xs**2, axis=1)[:, None]
            + np.sum(ys**2, axis=1)[None, :]
            - 2.0 * xs @ ys.T
        )
        return float(np.exp(-np.maximum(sq, 0.0) / (2.0 * bandwidth**2)).mean())

    sq_value = _gram_mean(a, a) + _gram_mean(b, b) - 2.0 * _gram_mean(a, b)
    return MmdEstimate(value=float(np.sqrt(max(sq_value, 0.0))), bandwidth=float(bandwidth))


def fit_gaussian(sample) -> tuple[np.ndarray, np.ndarray]:
    """Moment-matched Gaussian: sample mean and (1/n)-normalized covariance.

    The covariance gets a fixed 1e-9 relative diagonal load so downstream
    transport distances stay defined for degenerate samples.
    """
    pts = as_particles(sample).points
    n, d = pts.shape
    if n < d + 1:
        raise ValueError(f"need at least dim + 1 = {d + 1} points, got {n}")
    mean = pts.mean(axis=0)
    centered = pts - mean
    cov = centered.T @ centered / n
    trace = float(np.trace(cov))
    load = 1e-9 * (trace / d if trace > 0 else 1.0)
    return mean, cov + load * np.eye(d)


def gaussian_w2(mean_a, cov_a, mean_b, cov_b) -> float:
    """Quadratic Wasserstein distance between two Gaussians.

    Uses the closed form with symmetric matrix square roots; covariance
    inputs must be positive definite.
    """
    mean_a = np.asarray(mean_a, dtype=np.float64).ravel()
    mean_b = np.asarray(mean_b, dtype=np.float64).ravel()
    cov_a = np.asarray(cov_a, dtype=np.float64)
    cov_b = np.asarray(cov_b, dtype=np.float64)
    if mean_a.shape != mean_b.shape or cov_a.shape != cov_b.shape:
        raise ValueError("mean/covariance shapes do not match")
    for cov in (cov_a, cov_b):
        try:
            chol_spd(cov, 0.0)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariances must be positive definite") from exc

    def _sqrtm_psd(mat):
        vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
        return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T

    root_b = _sqrtm_psd(cov_b)
    cross = _sqrtm_psd(root_b @ cov_a @ root_b)
    sq = float(np.sum((mean_a - mean_b) ** 2) + np.trace(cov_a + cov_b - 2.0 * cross))
    return float(np.sqrt(max(sq, 0.0)))
