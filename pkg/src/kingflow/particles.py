"""Particle containers.

A particle set is an immutable batch of points together with the flow time at
which it was taken.  Points are always stored as a read-only ``(n, dim)``
float64 array; one-dimensional input is promoted to a single column.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ParticleSet:
    """Immutable collection of ``n`` points in ``R^dim`` at flow time ``t``."""

    points: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError(f"points must be 1- or 2-dimensional, got shape {pts.shape}")
        if pts.shape[0] == 0:
            raise ValueError("particle set must contain at least one point")
        if not np.isfinite(pts).all():
            raise ValueError("points contain non-finite values")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def with_points(self, points: np.ndarray, t: float | None = None) -> "ParticleSet":
        """Return a new set with replaced points (same time unless given)."""
        return ParticleSet(points, self.t if t is None else t)


def as_particles(data, t: float = 0.0) -> ParticleSet:
    """Coerce an array or ParticleSet to a ParticleSet."""
    if isinstance(data, ParticleSet):
        return data
    return ParticleSet(np.asarray(data, dtype=np.float64), t)
