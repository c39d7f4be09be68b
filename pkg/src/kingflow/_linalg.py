"""Shared positive-definite linear algebra helpers."""
from __future__ import annotations

import numpy as np
import scipy.linalg

#: relative jitter is escalated by factors of 10 up to this cap before giving up
JITTER_CAP = 1e-2


def chol_spd(mat: np.ndarray, jitter: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Cholesky-factor a symmetric matrix, loading the diagonal if needed.

    ``jitter`` is a relative amount: the applied load is ``jitter`` times the
    mean diagonal of ``mat`` (falling back to 1 when the trace is not
    positive).  If factorization fails the relative jitter is escalated by
    factors of 10 up to ``JITTER_CAP``.

    Returns ``(loaded, lower, jitter_applied)`` where ``loaded`` is the matrix
    that was actually factorized and ``jitter_applied`` the absolute amount
    added to each diagonal entry.  Raises ``np.linalg.LinAlgError`` if the
    matrix stays non-positive-definite at the cap; callers wrap this in their
    domain-specific error type.
    """
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {mat.shape}")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    sym = 0.5 * (mat + mat.T)
    dim = sym.shape[0]
    trace = float(np.trace(sym))
    scale = trace / dim if trace > 0 else 1.0

    factor = float(jitter)
    while True:
        applied = factor * scale
        loaded = sym + applied * np.eye(dim) if applied > 0 else sym
        try:
            lower = np.linalg.cholesky(loaded)
            return loaded, lower, applied
        except np.linalg.LinAlgError:
            if factor >= JITTER_CAP:
                raise
            factor = max(factor * 10.0, 1e-10)
            factor = min(factor, JITTER_CAP)


def chol_solve(lower: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L L^T x = b`` given the lower Cholesky factor ``L``."""
    return scipy.linalg.cho_solve((lower, True), b)


def is_spd(mat: np.ndarray) -> bool:
    """True when the symmetrized matrix admits a Cholesky factorization."""
    sym = 0.5 * (mat + mat.T)
    try:
        np.linalg.cholesky(sym)
        return True
    except np.linalg.LinAlgError:
        return False
