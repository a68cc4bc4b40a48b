"""Nystrom feature maps for the RBF kernel.

A map is fit by sketching the input rows into ``M_s`` pseudo-landmarks,
evaluating the exact RBF kernel among those landmarks, and whitening with
its half pseudo-inverse. Embedding a point is then one kernel evaluation
against each landmark followed by the whitening product, so the embedded
Gram approximates exp(-||x - y||^2 / (2 sigma_sq)) and reproduces it exactly
when the landmarks are the full training set.

Also provides the median-distance bandwidth heuristic and a bank of maps at
power-of-two multiples of it, which feeds the alignment module as a
raw-input baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.spatial.distance

from ._util import BlockSource, iter_blocks
from .errors import DegenerateInputError, DimensionError, ValidationError
from .lowrank import pinv_half
from .sketch import SketchSpec, sketch_rows


@dataclass(frozen=True)
class RbfFeatureMap:
    """Whitened landmark embedding of an RBF kernel.

    embed(x) = k(x, landmarks) @ whitener, with k the exact RBF at
    ``sigma_sq``; kept_rank is the surviving spectrum of the landmark kernel.
    """

    landmarks: np.ndarray
    sigma_sq: float
    whitener: np.ndarray
    kept_rank: int


def rbf_sigma_heuristic(X_phi: np.ndarray) -> float:
    """Bandwidth sigma^2 as half the largest squared row norm."""
    X_phi = np.asarray(X_phi, dtype=np.float64)
    if X_phi.ndim != 2 or X_phi.shape[0] == 0:
        raise DimensionError(f"expected a nonempty 2-D matrix, got shape {X_phi.shape}")
    out = float(np.max(np.einsum("ij,ij->i", X_phi, X_phi)) / 2.0)
    if out <= 0:
        raise DegenerateInputError("all feature rows are zero; bandwidth undefined")
    return out


def _rbf(A: np.ndarray, B: np.ndarray, sigma_sq: float) -> np.ndarray:
    d2 = scipy.spatial.distance.cdist(A, B, metric="sqeuclidean")
    return np.exp(-d2 / (2.0 * sigma_sq))


def fit_rbf_nystrom(
    X_phi: BlockSource,
    spec: SketchSpec,
    sigma_sq: float,
    eig_tol: float = 1e-10,
) -> RbfFeatureMap:
    """Fit the landmark embedding: landmarks = sketch of the input rows.

    ``spec.n_input`` must equal the row count of ``X_phi``; ``spec.n_buckets``
    sets the landmark count.
    """
    if sigma_sq <= 0:
        raise ValidationError(f"sigma_sq must be positive, got {sigma_sq}")
    landmarks = sketch_rows(spec, X_phi)
    W = _rbf(landmarks, landmarks, sigma_sq)
    Q, inv_sqrt = pinv_half(W, eig_tol)
    if Q.shape[1] == 0:
        raise DegenerateInputError("landmark kernel has no positive spectrum")
    return RbfFeatureMap(landmarks=landmarks, sigma_sq=float(sigma_sq),
                         whitener=Q * inv_sqrt, kept_rank=Q.shape[1])


def transform(map: RbfFeatureMap, X: BlockSource) -> np.ndarray:
    """Embed streamed rows; rows are independent, so any block split agrees."""
    parts = []
    for block in iter_blocks(X):
        block = np.asarray(block, dtype=np.float64)
        if block.shape[1] != map.landmarks.shape[1]:
            raise DimensionError(
                f"rows have {block.shape[1]} columns, landmarks have "
                f"{map.landmarks.shape[1]}"
            )
        parts.append(_rbf(block, map.landmarks, map.sigma_sq) @ map.whitener)
    if not parts:
        raise DimensionError("empty input stream")
    return parts[0] if len(parts) == 1 else np.vstack(parts)


def median_bandwidth(X: np.ndarray, max_pairs: int = 1_000_000, seed: int = 0) -> float:
    """Median squared distance over distinct row pairs.

    When N^2 exceeds ``max_pairs`` the median is taken over a seeded uniform
    sample of pairs instead of the full enumeration.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DimensionError("need at least two rows for a pairwise median")
    n = X.shape[0]
    if n * n > max_pairs:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, n, size=max_pairs)
        j = rng.integers(0, n - 1, size=max_pairs)
        j += (j >= i)  # skip the diagonal without rejection sampling
        d2 = np.einsum("ij,ij->i", X[i] - X[j], X[i] - X[j])
    else:
        d2 = scipy.spatial.distance.pdist(X, metric="sqeuclidean")
    return float(np.median(d2))


def rbf_kernel_bank(
    X: BlockSource,
    gamma: float,
    spec: SketchSpec,
    p_range: Iterable[int] = range(-2, 11),
    eig_tol: float = 1e-10,
) -> list[RbfFeatureMap]:
    """One Nystrom map per bandwidth 2 sigma_sq = 2^p * gamma.

    All maps share the landmark sketch, so they differ only in bandwidth; the
    resulting feature blocks feed the alignment module as a multi-bandwidth
    ensemble over raw inputs.
    """
    if gamma <= 0:
        raise ValidationError(f"gamma must be positive, got {gamma}")
    landmarks = sketch_rows(spec, X)
    maps = []
    for p in p_range:
        sigma_sq = float(2.0 ** (p - 1) * gamma)
        W = _rbf(landmarks, landmarks, sigma_sq)
        Q, inv_sqrt = pinv_half(W, eig_tol)
        if Q.shape[1] == 0:
            raise DegenerateInputError(
                f"bandwidth 2^{p} * gamma leaves no positive spectrum"
            )
        maps.append(RbfFeatureMap(landmarks=landmarks, sigma_sq=sigma_sq,
                                  whitener=Q * inv_sqrt, kept_rank=Q.shape[1]))
    return maps
