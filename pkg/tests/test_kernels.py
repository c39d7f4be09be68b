"""Scalar and matrix-valued kernels plus the bandwidth heuristic."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from kingflow import (
    KernelSpec,
    NtkSpec,
    diagonalized_kernel,
    kernel_cross_grad,
    kernel_gram,
    kernel_value,
    median_heuristic,
    ntk_gram_blocks,
    ntk_kernel,
    ntk_value,
    rbf_kernel,
)


# -- scalar kernel ------------------------------------------------------------

def test_kernel_value_at_zero_distance_is_one(rng):
    spec = rbf_kernel(0.9)
    x = rng.standard_normal(3)
    assert kernel_value(spec, x, x) == pytest.approx(1.0)


def test_kernel_value_is_symmetric(rng):
    spec = rbf_kernel(1.3)
    for _ in range(5):
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        assert kernel_value(spec, x, y) == pytest.approx(kernel_value(spec, y, x))


def test_kernel_value_one_bandwidth_apart():
    sigma = 0.7
    spec = rbf_kernel(sigma)
    assert kernel_value(spec, [0.0], [sigma]) == pytest.approx(np.exp(-0.5))


def test_kernel_gram_matches_entrywise_values(rng):
    spec = rbf_kernel(1.1)
    xs, ys = rng.standard_normal((4, 2)), rng.standard_normal((3, 2))
    gram = kernel_gram(spec, xs, ys)
    for i in range(4):
        for j in range(3):
            assert gram[i, j] == pytest.approx(kernel_value(spec, xs[i], ys[j]))


def test_kernel_gram_is_psd(rng):
    spec = rbf_kernel(0.8)
    pts = rng.standard_normal((12, 3))
    eigs = np.linalg.eigvalsh(kernel_gram(spec, pts, pts))
    assert eigs.min() > -1e-8 * eigs.max()


def test_unresolved_bandwidth_rejected():
    with pytest.raises(ValueError):
        kernel_value(rbf_kernel(), [0.0], [1.0])


# -- cross gradient -----------------------------------------------------------

def test_cross_grad_at_coincidence():
    sigma = 0.6
    grad = kernel_cross_grad(rbf_kernel(sigma), [1.0, 2.0], [1.0, 2.0])
    assert_allclose(grad, np.eye(2) / sigma**2)


def test_cross_grad_matches_double_finite_differences(rng):
    spec = rbf_kernel(0.9)
    h = 1e-4
    for _ in range(5):
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        grad = kernel_cross_grad(spec, x, y)
        approx = np.zeros((2, 2))
        for i in range(2):
            for j in range(2):
                ei, ej = np.zeros(2), np.zeros(2)
                ei[i], ej[j] = h, h
                approx[i, j] = (
                    kernel_value(spec, x + ei, y + ej)
                    - kernel_value(spec, x + ei, y - ej)
                    - kernel_value(spec, x - ei, y + ej)
                    + kernel_value(spec, x - ei, y - ej)
                ) / (4 * h * h)
        assert np.linalg.norm(grad - approx) <= 1e-4 * np.linalg.norm(grad)


def test_cross_grad_transpose_relation(rng):
    spec = rbf_kernel(1.2)
    x, y = rng.standard_normal(3), rng.standard_normal(3)
    assert_allclose(
        kernel_cross_grad(spec, x, y), kernel_cross_grad(spec, y, x).T, rtol=1e-12
    )


def test_cross_grad_is_jacobian_of_y_gradient(rng):
    # column j of the cross gradient is d/dx of (dk/dy_j)
    sigma = 0.8
    spec = rbf_kernel(sigma)
    x, y = rng.standard_normal(2), rng.standard_normal(2)

    def grad_y(xp):
        return kernel_value(spec, xp, y) * (xp - y) / sigma**2

    h = 1e-6
    approx = np.zeros((2, 2))
    for i in range(2):
        ei = np.zeros(2)
        ei[i] = h
        approx[i, :] = (grad_y(x + ei) - grad_y(x - ei)) / (2 * h)
    assert_allclose(kernel_cross_grad(spec, x, y), approx, atol=1e-8)


def test_cross_grad_requires_the_differentiable_kind():
    with pytest.raises(ValueError):
        kernel_cross_grad(diagonalized_kernel(1.0), [0.0], [1.0])
    with pytest.raises(ValueError):
        kernel_cross_grad(ntk_kernel(input_dim=1), [0.0], [1.0])


# -- tangent kernel -----------------------------------------------------------

def network_param_jacobian(spec: NtkSpec, x, h=1e-5):
    """Output Jacobian over all weights and biases by central differences."""
    params = [spec.w1.copy(), spec.b1.copy(), spec.w2.copy(), spec.b2.copy()]

    def forward(w1, b1, w2, b2):
        return w2 @ np.tanh(w1 @ x + b1) + b2

    cols = []
    for idx, arr in enumerate(params):
        flat = arr.ravel()
        for k in range(flat.size):
            bumped = [p.copy() for p in params]
            bumped[idx].ravel()[k] = flat[k] + h
            plus = forward(*bumped)
            bumped[idx].ravel()[k] = flat[k] - h
            minus = forward(*bumped)
            cols.append((plus - minus) / (2 * h))
    return np.stack(cols, axis=1)


def test_ntk_at_coincidence_is_symmetric_psd(rng):
    spec = NtkSpec(input_dim=3, hidden_width=8, seed=2)
    x = rng.standard_normal(3)
    block = ntk_value(spec, x, x)
    assert_allclose(block, block.T, rtol=1e-12)
    assert np.linalg.eigvalsh(block).min() > -1e-12


@pytest.mark.parametrize("hidden,dim", [(4, 2), (8, 3)])
def test_ntk_equals_parameter_jacobian_outer_product(hidden, dim, rng):
    spec = NtkSpec(input_dim=dim, hidden_width=hidden, seed=5)
    pts = rng.standard_normal((3, dim))
    jacs = [network_param_jacobian(spec, x) for x in pts]
    for i in range(3):
        for j in range(3):
            block = ntk_value(spec, pts[i], pts[j])
            oracle = jacs[i] @ jacs[j].T
            assert np.linalg.norm(block - oracle) <= 1e-4 * np.linalg.norm(oracle)


def test_stacked_ntk_gram_is_psd(rng):
    spec = NtkSpec(input_dim=2, hidden_width=16, seed=1)
    pts = rng.standard_normal((10, 2))
    blocks = ntk_gram_blocks(spec, pts, pts)
    stacked = blocks.transpose(0, 2, 1, 3).reshape(20, 20)
    eigs = np.linalg.eigvalsh(stacked)
    assert eigs.min() > -1e-8 * eigs.max()


def test_ntk_weights_are_frozen():
    spec = NtkSpec(input_dim=2, hidden_width=4, seed=0)
    with pytest.raises(ValueError):
        spec.w1[0, 0] = 1.0


# -- spec validation ----------------------------------------------------------

def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(kind="mystery")
    with pytest.raises(ValueError):
        KernelSpec(kind="rbf_scalar", bandwidth=-1.0)
    with pytest.raises(ValueError):
        KernelSpec(kind="empirical_ntk")  # needs a network spec
    with pytest.raises(ValueError):
        KernelSpec(kind="empirical_ntk", bandwidth=1.0, ntk=NtkSpec(input_dim=1))
    with pytest.raises(ValueError):
        KernelSpec(kind="rbf_scalar", ntk=NtkSpec(input_dim=1))


def test_kernel_spec_config_round_trip(rng):
    for spec in (rbf_kernel(0.5), diagonalized_kernel(), ntk_kernel(2, hidden_width=8, seed=4)):
        rebuilt = KernelSpec.from_config(spec.to_config())
        assert rebuilt.kind == spec.kind
        assert rebuilt.bandwidth == spec.bandwidth
        if spec.ntk is not None:
            pts = rng.standard_normal((2, spec.ntk.input_dim))
            assert_allclose(
                ntk_gram_blocks(rebuilt.ntk, pts, pts),
                ntk_gram_blocks(spec.ntk, pts, pts),
            )


def test_matrix_kernel_rejected_by_scalar_entry_points():
    spec = ntk_kernel(input_dim=2)
    with pytest.raises(ValueError):
        kernel_value(spec, [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        kernel_gram(spec, np.zeros((2, 2)), np.zeros((2, 2)))


# -- bandwidth heuristic ------------------------------------------------------

def test_median_heuristic_single_pair():
    assert median_heuristic(np.array([[0.0], [2.0]])) == pytest.approx(2.0)


def test_median_heuristic_enumerates_all_pairs():
    # pairwise distances of {0, 1, 2} are {1, 1, 2}
    assert median_heuristic(np.array([[0.0], [1.0], [2.0]])) == pytest.approx(1.0)


def test_median_heuristic_pools_both_sets():
    assert median_heuristic(np.array([[0.0]]), np.array([[2.0]])) == pytest.approx(2.0)


def test_median_heuristic_translation_invariance(rng):
    pts = rng.standard_normal((10, 2))
    assert median_heuristic(pts) == pytest.approx(median_heuristic(pts + 7.5))


def test_median_heuristic_degenerate_fallbacks():
    # all points identical: unit fallback
    assert median_heuristic(np.zeros((4, 1))) == 1.0
    # zero median but one distinct point: smallest nonzero distance
    pts = np.array([[0.0], [0.0], [0.0], [0.0], [3.0]])
    assert median_heuristic(pts) == pytest.approx(3.0)


def test_median_heuristic_needs_two_points():
    with pytest.raises(ValueError):
        median_heuristic(np.zeros((1, 2)))
