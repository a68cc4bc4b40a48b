"""Low-rank linear-kernel features per layer.

Given a layer matrix ``X`` (N x d) and a row sketch ``S`` (M x N), the
features are ``X_tilde = X B^T Q diag(eigs)^{-1/2}`` where ``B = S X`` and
``B B^T = Q diag(eigs) Q^T``. Their Gram ``X_tilde X_tilde^T`` equals the
landmark approximation ``X B^T (B B^T)^+ B X^T`` of the linear kernel
``X X^T``, and is exact whenever rank(X) survives the sketch (in particular
for the identity sketch).

The computation streams over row blocks twice: once to accumulate ``B``,
once to apply the projector, so ``X`` never needs to be in memory at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._util import BlockSource, iter_blocks
from .errors import DegenerateInputError, DimensionError, ValidationError
from .sketch import SketchSpec, sketch_rows


@dataclass(frozen=True)
class LowRankFeatures:
    """Per-layer features whose Gram approximates the layer's linear kernel.

    ``data`` is N x r with r = kept_rank <= min(sketch buckets, d).
    ``projector`` is the d x r map that produced ``data``; new rows from the
    same layer (e.g. test samples) embed as ``rows @ projector``.
    """

    data: np.ndarray
    layer_id: int
    kept_rank: int
    eig_tol: float
    projector: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]


def pinv_half(C: np.ndarray, eig_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Half pseudo-inverse factors of a symmetric PSD matrix.

    Returns ``(Q, inv_sqrt_eigs)`` with orthonormal columns in Q, ordered by
    descending eigenvalue; only eigenvalues >= eig_tol * max eigenvalue (and
    > 0) are kept, so ``Q diag(inv_sqrt_eigs)**2 Q^T`` is the pseudo-inverse
    restricted to the retained spectrum.
    """
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {C.shape}")
    if not 0.0 < eig_tol < 1.0:
        raise ValidationError(f"eig_tol must lie in (0, 1), got {eig_tol}")
    scale = np.max(np.abs(C))
    asym = np.max(np.abs(C - C.T))
    if scale > 0 and asym > 1e-8 * scale:
        raise ValidationError(
            f"matrix is not symmetric (relative asymmetry {asym / scale:.2e})"
        )
    eigs, Q = scipy.linalg.eigh((C + C.T) / 2.0)
    # eigh returns ascending order; flip to descending
    eigs = eigs[::-1]
    Q = Q[:, ::-1]
    lam_max = eigs[0] if eigs.size else 0.0
    if lam_max <= 0:
        return np.empty((C.shape[0], 0)), np.empty(0)
    keep = eigs >= eig_tol * lam_max
    return Q[:, keep], 1.0 / np.sqrt(eigs[keep])


def nystrom_linear_features(
    X: BlockSource,
    spec: SketchSpec,
    eig_tol: float = 1e-10,
    layer_id: int = 0,
) -> LowRankFeatures:
    """Low-rank features approximating the linear kernel of a streamed layer.

    ``X`` is the full N x d matrix or a factory yielding consecutive row
    blocks; a factory is iterated twice (the caller keeps blocks re-readable,
    e.g. on disk). ``spec.n_input`` must equal N.
    """
    if not 0.0 < eig_tol < 1.0:
        raise ValidationError(f"eig_tol must lie in (0, 1), got {eig_tol}")
    B = sketch_rows(spec, X)
    C = B @ B.T
    lam_max = float(np.max(np.abs(C))) if C.size else 0.0
    if lam_max <= 0:
        raise DegenerateInputError(
            f"layer {layer_id}: sketched Gram is zero (all-zero features?)"
        )
    Q, inv_sqrt = pinv_half(C, eig_tol)
    if Q.shape[1] == 0:
        raise DegenerateInputError(
            f"layer {layer_id}: no positive eigenvalues survive truncation"
        )
    projector = B.T @ (Q * inv_sqrt)
    parts = []
    total = 0
    for block in iter_blocks(X):
        parts.append(np.asarray(block, dtype=np.float64) @ projector)
        total += block.shape[0]
    if total != spec.n_input:
        raise DimensionError(
            f"second pass saw {total} rows, spec.n_input={spec.n_input}"
        )
    data = parts[0] if len(parts) == 1 else np.vstack(parts)
    return LowRankFeatures(data=data, layer_id=layer_id,
                           kept_rank=Q.shape[1], eig_tol=eig_tol,
                           projector=projector)
