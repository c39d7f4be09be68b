"""Positive-definite factorization helpers."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from kingflow._linalg import JITTER_CAP, chol_solve, chol_spd, is_spd


def test_pd_matrix_factors_without_load():
    mat = np.array([[2.0, 0.5], [0.5, 1.0]])
    loaded, lower, applied = chol_spd(mat, 0.0)
    assert applied == 0.0
    assert_allclose(lower @ lower.T, mat, rtol=1e-12)
    assert_allclose(loaded, mat)


def test_jitter_is_relative_to_mean_diagonal():
    mat = np.diag([4.0, 0.0])  # singular, trace 4, mean diagonal 2
    loaded, _, applied = chol_spd(mat, 1e-6)
    assert_allclose(applied, 2e-6)
    assert_allclose(loaded, mat + 2e-6 * np.eye(2))


def test_zero_matrix_escalates_from_unit_scale():
    loaded, _, applied = chol_spd(np.zeros((3, 3)), 0.0)
    # trace is zero, so the load scale falls back to 1 and escalation starts
    # at the smallest rung
    assert applied == pytest.approx(1e-10)
    assert_allclose(loaded, 1e-10 * np.eye(3))


def test_indefinite_matrix_fails_past_the_cap():
    mat = np.diag([1.0, -1.0])  # zero trace: absolute loads capped at JITTER_CAP
    assert JITTER_CAP < 1.0
    with pytest.raises(np.linalg.LinAlgError):
        chol_spd(mat, 1e-6)


def test_asymmetric_input_is_symmetrized():
    mat = np.array([[2.0, 1.0], [0.0, 2.0]])
    loaded, _, _ = chol_spd(mat, 0.0)
    assert_allclose(loaded, np.array([[2.0, 0.5], [0.5, 2.0]]))


def test_non_square_and_negative_jitter_rejected():
    with pytest.raises(ValueError):
        chol_spd(np.zeros((2, 3)), 0.0)
    with pytest.raises(ValueError):
        chol_spd(np.eye(2), -1.0)


def test_chol_solve_matches_direct_solve(rng):
    shape = rng.standard_normal((4, 4))
    mat = shape @ shape.T + 4.0 * np.eye(4)
    b = rng.standard_normal(4)
    _, lower, _ = chol_spd(mat, 0.0)
    assert_allclose(chol_solve(lower, b), np.linalg.solve(mat, b), rtol=1e-10)


def test_is_spd():
    assert is_spd(np.eye(2))
    assert not is_spd(np.diag([1.0, -1.0]))
