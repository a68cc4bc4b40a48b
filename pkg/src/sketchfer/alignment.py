"""Layer selection by kernel-target alignment.

For per-layer features ``X_tilde_l`` with linear kernels
``K_l = X_tilde_l X_tilde_l^T`` and a one-hot label matrix Y, the nonnegative
unit-norm weights ``mu`` maximize the alignment

    <sum_l mu_l K_l, Y Y^T>_F / ||sum_l mu_l K_l||_F.

The maximizer is ``v*/||v*||`` where v* solves the nonnegative quadratic
program min_{v >= 0} v^T M v - 2 v^T a with M_{k,l} = ||X_tilde_k^T
X_tilde_l||_F^2 and a_l = ||X_tilde_l^T Y||_F^2. Everything is computed from
the low-rank factors; no N x N kernel is ever formed.

The chosen layers are concatenated as ``[sqrt(mu_l) X_tilde_l]`` over the
support of mu, so the concatenation's Gram is exactly the weighted kernel
combination.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._util import validate_one_hot
from .errors import DegenerateInputError, DimensionError, ValidationError
from .lowrank import LowRankFeatures

_SUPPORT_EPS = 1e-8  # relative threshold below which mu entries are zeroed


@dataclass(frozen=True)
class AlignmentProblem:
    """Sufficient statistics of the alignment program over L layers.

    gram_stats: symmetric L x L matrix of squared cross-Gram Frobenius norms.
    target_stats: length-L vector of squared feature-label correlations.
    """

    gram_stats: np.ndarray
    target_stats: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.gram_stats, dtype=np.float64)
        a = np.asarray(self.target_stats, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionError(f"gram_stats must be square, got {M.shape}")
        if a.shape != (M.shape[0],):
            raise DimensionError(
                f"target_stats must have length {M.shape[0]}, got {a.shape}"
            )
        if np.max(np.abs(M - M.T), initial=0.0) > 1e-8 * max(np.max(np.abs(M), initial=0.0), 1e-300):
            raise ValidationError("gram_stats must be symmetric")
        if np.any(M < 0) or np.any(a < 0):
            raise ValidationError("alignment statistics must be nonnegative")
        object.__setattr__(self, "gram_stats", M)
        object.__setattr__(self, "target_stats", a)

    @property
    def n_layers(self) -> int:
        return self.gram_stats.shape[0]


@dataclass(frozen=True)
class AlignmentWeights:
    """Unit-norm nonnegative layer weights and the achieved alignment.

    ``support`` lists the indices with nonzero weight. ``scale`` is the norm
    of the unnormalized QP solution, so ``scale * mu`` recovers it.
    """

    mu: np.ndarray
    support: np.ndarray
    objective: float
    scale: float


def build_gram_stats(features: list[LowRankFeatures], Y: np.ndarray) -> AlignmentProblem:
    """Alignment statistics from per-layer features and one-hot labels.

    Each entry touches only r_k x r_l cross-products, so cost is independent
    of N beyond the initial products.
    """
    if len(features) < 1:
        raise ValidationError("need at least one layer")
    Y = validate_one_hot(Y)
    n = features[0].data.shape[0]
    for f in features:
        if f.data.shape[0] != n:
            raise DimensionError(
                f"layer {f.layer_id} has {f.data.shape[0]} rows, expected {n}"
            )
    if Y.shape[0] != n:
        raise DimensionError(f"labels have {Y.shape[0]} rows, features have {n}")
    L = len(features)
    M = np.zeros((L, L))
    a = np.zeros(L)
    for k in range(L):
        Fk = features[k].data
        a[k] = np.linalg.norm(Fk.T @ Y) ** 2
        for l in range(k, L):
            M[k, l] = M[l, k] = np.linalg.norm(Fk.T @ features[l].data) ** 2
    return AlignmentProblem(gram_stats=M, target_stats=a)


def _lam_max(M: np.ndarray) -> float:
    return float(scipy.linalg.eigh(M, eigvals_only=True)[-1])


def _pgd(M: np.ndarray, a: np.ndarray, tol: float, max_iter: int) -> tuple[np.ndarray, bool]:
    """Projected gradient descent for min_{v>=0} v^T M v - 2 v^T a."""
    step = 1.0 / _lam_max(M)
    v = np.maximum(a, 0.0) * step  # scaled gradient step from 0
    obj = v @ M @ v - 2.0 * (v @ a)
    for _ in range(max_iter):
        grad = 2.0 * (M @ v - a)
        v_new = np.maximum(v - step * grad, 0.0)
        obj_new = v_new @ M @ v_new - 2.0 * (v_new @ a)
        if obj - obj_new < tol and np.max(np.abs(v_new - v)) < np.sqrt(tol):
            return v_new, True
        v, obj = v_new, obj_new
    return v, False


def _polish(M: np.ndarray, a: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Solve exactly on the active set suggested by an approximate minimizer.

    Falls back to the input iterate when the polished point is infeasible or
    violates the first-order conditions.
    """
    scale = max(float(np.max(v)), 1e-300)
    active = v > 1e-10 * scale
    for _ in range(v.size + 1):
        if not active.any():
            break
        sub = M[np.ix_(active, active)]
        try:
            v_act = scipy.linalg.solve(sub, a[active], assume_a="pos")
        except scipy.linalg.LinAlgError:
            v_act, *_ = np.linalg.lstsq(sub, a[active], rcond=None)
        if np.any(v_act < 0):
            # drop the most negative coordinate and retry
            idx = np.flatnonzero(active)
            active[idx[np.argmin(v_act)]] = False
            continue
        cand = np.zeros_like(v)
        cand[active] = v_act
        grad = 2.0 * (M @ cand - a)
        gscale = max(float(np.max(np.abs(a))), float(np.max(np.abs(M))), 1.0)
        if np.all(grad[~active] >= -1e-9 * gscale):
            return cand
        # a clamped coordinate wants in; add the worst offender
        blocked = np.flatnonzero(~active)
        active[blocked[np.argmin(grad[~active])]] = True
    return v


def solve_nn_quadratic(
    problem: AlignmentProblem,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> AlignmentWeights:
    """Unit-norm nonnegative weights maximizing the kernel-target alignment.

    Projected gradient descent with step 1/lambda_max, followed by an exact
    solve on the identified active set; entries below a relative 1e-8 of the
    peak weight are zeroed, then the vector is renormalized.
    """
    M = problem.gram_stats
    a = problem.target_stats
    if not np.any(a > 0):
        raise DegenerateInputError("all layers are uncorrelated with the labels")
    if _lam_max(M) <= 0:
        raise DegenerateInputError("gram statistics are identically zero")
    # Solve in a normalized frame for scale-free tolerances; the minimizer of
    # (M/c, a/c) is the same v for any c > 0.
    c = float(np.max(M))
    v, converged = _pgd(M / c, a / c, tol, max_iter)
    if not converged:
        warnings.warn(
            "alignment solver hit max_iter before the objective settled; "
            "returning the best iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    v = _polish(M / c, a / c, v)
    norm = float(np.linalg.norm(v))
    if norm <= 0:
        raise DegenerateInputError("alignment program has the zero solution")
    mu = v / norm
    mu[mu < _SUPPORT_EPS * np.max(mu)] = 0.0
    mu /= np.linalg.norm(mu)
    support = np.flatnonzero(mu)
    objective = alignment_score((float(mu @ a), float(np.sqrt(mu @ M @ mu))))
    return AlignmentWeights(mu=mu, support=support, objective=objective,
                            scale=norm)


def alignment_score(K_stats: tuple[float, float]) -> float:
    """Alignment value from kernel statistics (<K, YY^T>_F, ||K||_F)."""
    inner, norm = K_stats
    if norm <= 0:
        raise DegenerateInputError("kernel has zero Frobenius norm")
    return inner / norm


def concat_weighted(
    features: list[LowRankFeatures],
    weights: AlignmentWeights,
    only: np.ndarray | None = None,
) -> np.ndarray:
    """Horizontal concatenation of sqrt(mu_l) * X_tilde_l over the support.

    ``only`` restricts to a subset of support indices (used by layer-subset
    sweeps); weights are kept as-is, not renormalized, so the full subset
    reproduces the full concatenation exactly.
    """
    sel = weights.support if only is None else np.asarray(only)
    if sel.size == 0:
        raise DegenerateInputError("empty support: no layers to concatenate")
    for l in sel:
        if l not in weights.support:
            raise ValidationError(f"layer position {l} is not in the support")
    parts = [np.sqrt(weights.mu[l]) * features[l].data for l in sel]
    return parts[0] if len(parts) == 1 else np.hstack(parts)


def r_squared_diagnostic(X_phi: np.ndarray, Y: np.ndarray) -> float:
    """Fraction of feature energy inside the label subspace (diagnostic only).

    Computed as ||X_phi^T Q_Y||_F^2 / ||X_phi||_F^2 with Q_Y an orthonormal
    basis of the label columns. Values near 1 signal that the features can
    interpolate the labels, a red flag for overfitting when many layers are
    accumulated.
    """
    Y = validate_one_hot(Y)
    X_phi = np.asarray(X_phi, dtype=np.float64)
    if X_phi.shape[0] != Y.shape[0]:
        raise DimensionError(
            f"features have {X_phi.shape[0]} rows, labels have {Y.shape[0]}"
        )
    counts = Y.sum(axis=0)
    if not np.any(counts > 0):
        raise DegenerateInputError("label matrix is zero")
    # one-hot columns are orthogonal, so normalizing them gives the basis
    QY = Y[:, counts > 0] / np.sqrt(counts[counts > 0])
    denom = np.linalg.norm(X_phi) ** 2
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(QY.T @ X_phi) ** 2 / denom)
