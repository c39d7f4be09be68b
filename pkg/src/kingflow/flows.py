"""Particle flows: kernel natural-gradient drifts and baseline velocity fields.

The drift solvers pick, inside a kernel-induced velocity space, the field
whose induced parameter change best matches the natural-gradient direction on
the feature manifold.  The optimality system is solved in its feature-space
(dual) form: with feature Jacobians ``J_i`` at the particles and a
matrix-valued kernel block ``K(x, y)``, the system matrix is

    ridge * Fisher + (1/n^2) sum_ij J_i K(x_i, x_j) J_j^T

and the right-hand side is the feature-mean gap between targets and
particles.  The solved coefficient vector then defines the velocity field

    h(q) = (1/n) sum_i K(q, x_i) J_i^T coeff

evaluated anywhere.  ``rbf_scalar`` uses the Gaussian kernel's mixed second
derivative as the block, ``empirical_ntk`` a closed-form tangent kernel, and
``diagonalized_scalar`` substitutes ``k(x, y) * I``.  Any object exposing
``pair_blocks(xs, ys) -> (n, m, d, d)`` works as a custom matrix kernel.

``run_flow`` advances particles by forward Euler, re-solving the drift (and,
unless frozen, the bandwidth) every iteration.  Reverse-KL Wasserstein
gradient flow and energy-distance flow are provided as kernel-free baselines
sharing the same loop.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._linalg import chol_solve, chol_spd
from .errors import DivergenceError, SolverError
from .kernels import (
    DIAGONALIZED_SCALAR,
    EMPIRICAL_NTK,
    RBF_SCALAR,
    KernelSpec,
    median_heuristic,
)
from .manifold import FeatureMap, feature_mean, fisher_estimate
from .particles import ParticleSet

KING = "king"
NTKING = "ntking"
WGF = "wgf"
MMD_FLOW = "mmd_flow"
FLOW_METHODS = (KING, NTKING, WGF, MMD_FLOW)


@dataclass(frozen=True)
class DriftSolution:
    """Solved drift system; evaluate anywhere with ``eval_drift``."""

    gamma_factor: np.ndarray
    coeff: np.ndarray
    feature_map: FeatureMap
    kernel: KernelSpec | object
    anchors: ParticleSet
    ridge: float


@dataclass(frozen=True)
class FlowConfig:
    """Forward-Euler loop parameters."""

    step: float
    iterations: int
    ridge: float = 1e-3
    jitter: float = 1e-6
    log_every: int = 10
    freeze_bandwidth: bool = False

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.ridge <= 0:
            raise ValueError("ridge must be positive")
        if self.jitter < 0:
            raise ValueError("jitter must be nonnegative")
        if self.log_every < 1:
            raise ValueError("log_every must be at least 1")


# -- kernel quadratic forms ---------------------------------------------------

def _scalar_gram(bandwidth: float, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    sq = (
        np.sum(xs**2, axis=1)[:, None]
        + np.sum(ys**2, axis=1)[None, :]
        - 2.0 * xs @ ys.T
    )
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * bandwidth**2))


def _gram_quadratic(kernel, pts: np.ndarray, jac: np.ndarray) -> np.ndarray:
    """``(1/n^2) sum_ij J_i K(x_i, x_j) J_j^T`` for any supported kernel."""
    n = pts.shape[0]
    if isinstance(kernel, KernelSpec):
        if kernel.kind == RBF_SCALAR:
            s2 = kernel.bandwidth**2
            gram = _scalar_gram(kernel.bandwidth, pts, pts)
            weighted = np.einsum("ij,jad->iad", gram, jac, optimize=True)
            term_eye = np.einsum("iad,ibd->ab", jac, weighted, optimize=True)
            diffs = pts[:, None, :] - pts[None, :, :]
            contracted = np.einsum("iad,ijd->ija", jac, diffs, optimize=True)
            term_outer = -np.einsum(
                "ij,ija,jib->ab", gram, contracted, contracted, optimize=True
            )
            return (term_eye / s2 - term_outer / s2**2) / n**2
        if kernel.kind == DIAGONALIZED_SCALAR:
            gram = _scalar_gram(kernel.bandwidth, pts, pts)
            weighted = np.einsum("ij,jad->iad", gram, jac, optimize=True)
            return np.einsum("iad,ibd->ab", jac, weighted, optimize=True) / n**2
        if kernel.kind == EMPIRICAL_NTK:
            ntk = kernel.ntk
            act, act_deriv = ntk.activations(pts)
            out_layer = act @ act.T + 1.0
            weighted = np.einsum("ij,jad->iad", out_layer, jac, optimize=True)
            term_out = np.einsum("iad,ibd->ab", jac, weighted, optimize=True)
            proj = np.einsum("iad,dh->iah", jac, ntk.w2, optimize=True) * act_deriv[:, None, :]
            in_layer = pts @ pts.T + 1.0
            weighted_in = np.einsum("ij,jah->iah", in_layer, proj, optimize=True)
            term_in = np.einsum("iah,ibh->ab", proj, weighted_in, optimize=True)
            return (term_out + term_in) / n**2
        raise ValueError(f"unsupported kernel kind: {kernel.kind!r}")
    blocks = kernel.pair_blocks(pts, pts)
    return np.einsum("iad,ijde,jbe->ab", jac, blocks, jac, optimize=True) / n**2


def _apply_kernel(kernel, queries: np.ndarray, anchors: np.ndarray, vels: np.ndarray) -> np.ndarray:
    """``(1/n) sum_i K(q, x_i) v_i`` for each query row ``q``."""
    n = anchors.shape[0]
    if isinstance(kernel, KernelSpec):
        if kernel.kind == RBF_SCALAR:
            s2 = kernel.bandwidth**2
            diffs = queries[:, None, :] - anchors[None, :, :]
            gram = np.exp(-np.sum(diffs**2, axis=2) / (2.0 * s2))
            inner = np.einsum("qid,id->qi", diffs, vels, optimize=True)
            part_eye = np.einsum("qi,id->qd", gram, vels, optimize=True) / s2
            part_outer = np.einsum("qi,qi,qid->qd", gram, inner, diffs, optimize=True) / s2**2
            return (part_eye - part_outer) / n
        if kernel.kind == DIAGONALIZED_SCALAR:
            gram = _scalar_gram(kernel.bandwidth, queries, anchors)
            return gram @ vels / n
        if kernel.kind == EMPIRICAL_NTK:
            ntk = kernel.ntk
            act_q, deriv_q = ntk.activations(queries)
            act_a, deriv_a = ntk.activations(anchors)
            out_layer = act_q @ act_a.T + 1.0
            in_layer = queries @ anchors.T + 1.0
            projected = vels @ ntk.w2  # (n, h)
            hidden = deriv_q * (in_layer @ (deriv_a * projected))
            return (out_layer @ vels + hidden @ ntk.w2.T) / n
        raise ValueError(f"unsupported kernel kind: {kernel.kind!r}")
    blocks = kernel.pair_blocks(queries, anchors)
    return np.einsum("qide,ie->qd", blocks, vels, optimize=True) / n


def _resolve_bandwidth(kernel, particles: ParticleSet, targets: ParticleSet | None):
    if not isinstance(kernel, KernelSpec) or kernel.kind == EMPIRICAL_NTK:
        return kernel
    if kernel.bandwidth is not None:
        return kernel
    return kernel.with_bandwidth(median_heuristic(particles, targets))


def _solve_drift(
    fmap: FeatureMap,
    kernel,
    particles: ParticleSet,
    targets: ParticleSet | None,
    ridge: float,
    jitter: float,
) -> DriftSolution:
    if ridge <= 0:
        raise ValueError("ridge must be positive")
    if targets is not None and targets.dim != particles.dim:
        raise ValueError(
            f"dimension mismatch: targets {targets.dim}, particles {particles.dim}"
        )
    kernel = _resolve_bandwidth(kernel, particles, targets)
    fisher = fisher_estimate(fmap, particles, jitter)
    gap = -feature_mean(fmap, particles)
    if targets is not None:
        gap = gap + feature_mean(fmap, targets)
    jac = fmap.jacobian(particles.points)
    system = ridge * fisher.matrix + _gram_quadratic(kernel, particles.points, jac)
    try:
        _, lower, _ = chol_spd(system, 0.0)
    except np.linalg.LinAlgError as exc:
        raise SolverError("drift system is not positive definite") from exc
    coeff = chol_solve(lower, gap)
    return DriftSolution(
        gamma_factor=lower,
        coeff=coeff,
        feature_map=fmap,
        kernel=kernel,
        anchors=particles,
        ridge=ridge,
    )


def solve_king_drift(
    fmap: FeatureMap,
    kernel,
    particles: ParticleSet,
    targets: ParticleSet | None,
    ridge: float,
    jitter: float = 1e-6,
) -> DriftSolution:
    """Drift through the mixed-derivative Gaussian kernel (or a custom matrix kernel)."""
    if isinstance(kernel, KernelSpec) and kernel.kind != RBF_SCALAR:
        raise ValueError(f"king drift expects an {RBF_SCALAR} kernel, got {kernel.kind}")
    return _solve_drift(fmap, kernel, particles, targets, ridge, jitter)


def solve_ntking_drift(
    fmap: FeatureMap,
    kernel,
    particles: ParticleSet,
    targets: ParticleSet | None,
    ridge: float,
    jitter: float = 1e-6,
) -> DriftSolution:
    """Drift through a tangent kernel, exact or diagonalized to ``k * I``."""
    if isinstance(kernel, KernelSpec) and kernel.kind not in (
        EMPIRICAL_NTK,
        DIAGONALIZED_SCALAR,
    ):
        raise ValueError(
            f"ntking drift expects {EMPIRICAL_NTK} or {DIAGONALIZED_SCALAR}, got {kernel.kind}"
        )
    return _solve_drift(fmap, kernel, particles, targets, ridge, jitter)


def eval_drift(solution: DriftSolution, queries) -> np.ndarray:
    """Evaluate the solved velocity field at query points, shape ``(m, d)``."""
    if isinstance(queries, ParticleSet):
        pts = queries.points
    else:
        pts = np.asarray(queries, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
    if pts.shape[1] != solution.anchors.dim:
        raise ValueError(
            f"queries have dimension {pts.shape[1]}, anchors {solution.anchors.dim}"
        )
    jac = solution.feature_map.jacobian(solution.anchors.points)
    vels = np.einsum("iad,a->id", jac, solution.coeff, optimize=True)
    return _apply_kernel(solution.kernel, pts, solution.anchors.points, vels)


# -- baseline velocity fields -------------------------------------------------

def _kde_score(queries: np.ndarray, data: np.ndarray, bandwidth: float) -> np.ndarray:
    """Gradient of the log of a Gaussian kernel density estimate."""
    diffs = data[None, :, :] - queries[:, None, :]  # (m, n, d)
    logits = -np.sum(diffs**2, axis=2) / (2.0 * bandwidth**2)
    logits -= logits.max(axis=1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=1, keepdims=True)
    return np.einsum("qn,qnd->qd", weights, diffs, optimize=True) / bandwidth**2


def wgf_velocity(
    targets: ParticleSet,
    particles: ParticleSet,
    bandwidth_targets: float | None = None,
    bandwidth_particles: float | None = None,
) -> np.ndarray:
    """Reverse-KL Wasserstein gradient flow velocity from two KDE scores.

    The velocity at each particle is the target KDE score minus the particle
    KDE score; unset bandwidths fall back to per-set median heuristics.
    """
    if targets.dim != particles.dim:
        raise ValueError(f"dimension mismatch: targets {targets.dim}, particles {particles.dim}")
    bw_t = bandwidth_targets if bandwidth_targets is not None else median_heuristic(targets)
    bw_p = bandwidth_particles if bandwidth_particles is not None else median_heuristic(particles)
    score_t = _kde_score(particles.points, targets.points, bw_t)
    score_p = _kde_score(particles.points, particles.points, bw_p)
    return score_t - score_p


def mmd_flow_velocity(targets: ParticleSet, particles: ParticleSet) -> np.ndarray:
    """Energy-distance flow velocity (descent direction for the energy MMD).

    Mean unit displacement vectors away from fellow particles repel and
    toward the target set attract; coincident pairs contribute zero.
    """
    if targets.dim != particles.dim:
        raise ValueError(f"dimension mismatch: targets {targets.dim}, particles {particles.dim}")
    pts, tgt = particles.points, targets.points
    n, m = pts.shape[0], tgt.shape[0]

    def _unit_sums(diffs):
        norms = np.linalg.norm(diffs, axis=2)
        units = diffs / (norms[:, :, None] + 1e-12)
        units[norms == 0] = 0.0
        return units.sum(axis=1)

    repel = _unit_sums(pts[:, None, :] - pts[None, :, :])
    attract = _unit_sums(pts[:, None, :] - tgt[None, :, :])
    return repel / n - attract / m


# -- flow loop ----------------------------------------------------------------

Observer = Callable[[int, float, ParticleSet, dict], None]


def run_flow(
    method: str,
    fmap: FeatureMap | None,
    kernel,
    targets: ParticleSet | None,
    init: ParticleSet,
    config: FlowConfig,
    observer: Observer | None = None,
    extra_metrics: Callable[[ParticleSet], dict] | None = None,
) -> ParticleSet:
    """Advance particles by forward Euler under the chosen method.

    The drift methods re-solve their system every iteration on the current
    particles; scalar-kernel bandwidths left unset are refreshed by the
    median heuristic each iteration unless ``config.freeze_bandwidth`` pins
    them to the heuristic value on the initial state.  The observer, when
    given, is called on the initial state and then every ``log_every``
    iterations (always including the last) with iteration number, flow time,
    the particle set, and a diagnostics dict.
    """
    if method not in FLOW_METHODS:
        raise ValueError(f"unknown flow method: {method!r}")
    if method in (WGF, MMD_FLOW):
        if targets is None:
            raise ValueError(f"{method} requires target samples")
    else:
        if fmap is None:
            raise ValueError(f"{method} requires a feature map")
    if targets is not None and targets.dim != init.dim:
        raise ValueError(f"dimension mismatch: targets {targets.dim}, init {init.dim}")

    if method in (KING, NTKING) and config.freeze_bandwidth:
        kernel = _resolve_bandwidth(kernel, init, targets)
    bw_targets = median_heuristic(targets) if method == WGF else None

    def _emit(iteration, t, particles, diagnostics):
        if observer is None:
            return
        if extra_metrics is not None:
            diagnostics = {**diagnostics, **extra_metrics(particles)}
        observer(iteration, t, particles, diagnostics)

    particles = init
    _emit(0, particles.t, particles, {})
    solve = solve_king_drift if method == KING else solve_ntking_drift
    for iteration in range(1, config.iterations + 1):
        if method in (KING, NTKING):
            solution = solve(
                fmap, kernel, particles, targets, config.ridge, config.jitter
            )
            velocity = eval_drift(solution, particles)
        elif method == WGF:
            velocity = wgf_velocity(targets, particles, bandwidth_targets=bw_targets)
        else:
            velocity = mmd_flow_velocity(targets, particles)
        moved = particles.points + config.step * velocity
        if not np.isfinite(moved).all():
            raise DivergenceError(
                f"particles became non-finite at iteration {iteration}", iteration
            )
        particles = ParticleSet(moved, t=particles.t + config.step)
        if iteration % config.log_every == 0 or iteration == config.iterations:
            drift_norm = float(np.linalg.norm(velocity, axis=1).mean())
            _emit(iteration, particles.t, particles, {"drift_norm": drift_norm})
    return particles
