"""Closed-form ridge regression, transductive variant, and cross-validation.

The primal branch solves (X^T X + alpha I) W = X^T Y in feature dimension;
the dual branch solves (X X^T + alpha I) C = Y in sample dimension and
predicts through the training kernel. Both are plain symmetric
positive-definite solves, never explicit inversions, and agree to rounding.

The transductive variant refits on pseudo-labeled unlabeled rows:

    W = (beta' X'^T X' + beta X^T X + I)^{-1} (beta' X'^T Y' + beta X^T Y)

with Y' the hardened stage-1 predictions; beta' = 0, beta = 1/alpha reduces
it exactly to the plain ridge fit.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ._util import check_finite, one_hot
from .errors import DimensionError, ValidationError

DEFAULT_ALPHA_GRID = (1e-1, 1e-2, 1e-3, 1e-4)
DEFAULT_BETA_GRID = (0.0, 0.1, 1.0, 10.0)

_MODEL_MAGIC = b"SKFRIDGE"
_MODEL_VERSION = 1


@dataclass(frozen=True)
class RidgeModel:
    """Fitted ridge regressor.

    Primal mode stores weights (D x c); dual mode stores coefficients
    (N x c) together with the training features needed to form test kernels.
    ``temperature`` is an optional calibration scalar carried alongside.
    """

    mode: str
    weights: np.ndarray
    alpha: float
    class_count: int
    train_X: np.ndarray | None = None
    temperature: float | None = None


@dataclass(frozen=True)
class PredictionScores:
    """Raw per-class scores plus first-argmax labels."""

    scores: np.ndarray
    labels: np.ndarray

    @classmethod
    def from_scores(cls, scores: np.ndarray) -> "PredictionScores":
        scores = np.asarray(scores, dtype=np.float64)
        if scores.ndim != 2:
            raise DimensionError(f"scores must be 2-D, got shape {scores.shape}")
        return cls(scores=scores, labels=np.argmax(scores, axis=1))


def _as_matrix(X: np.ndarray, what: str) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"{what} must be 2-D, got shape {X.shape}")
    check_finite(X, what)
    return X


def fit_ridge(X: np.ndarray, Y: np.ndarray, alpha: float, mode: str = "auto") -> RidgeModel:
    """Closed-form ridge fit; auto mode solves in the smaller dimension."""
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    n, d = X.shape
    if n < 1 or d < 1:
        raise DimensionError(f"need at least one sample and one feature, got {X.shape}")
    if Y.shape[0] != n:
        raise DimensionError(f"X has {n} rows but Y has {Y.shape[0]}")
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    if mode == "auto":
        mode = "primal" if n >= d else "dual"
    if mode == "primal":
        G = X.T @ X
        G[np.diag_indices_from(G)] += alpha
        W = scipy.linalg.solve(G, X.T @ Y, assume_a="pos")
        return RidgeModel(mode="primal", weights=W, alpha=float(alpha),
                          class_count=Y.shape[1])
    if mode == "dual":
        K = X @ X.T
        K[np.diag_indices_from(K)] += alpha
        C = scipy.linalg.solve(K, Y, assume_a="pos")
        return RidgeModel(mode="dual", weights=C, alpha=float(alpha),
                          class_count=Y.shape[1], train_X=X)
    raise ValidationError(f"unknown mode {mode!r}; expected auto, primal or dual")


def predict(model: RidgeModel, X: np.ndarray) -> PredictionScores:
    """Per-class scores for new rows; labels break ties at the lowest index."""
    X = _as_matrix(X, "X")
    if model.mode == "primal":
        if X.shape[1] != model.weights.shape[0]:
            raise DimensionError(
                f"model expects {model.weights.shape[0]} features, got {X.shape[1]}"
            )
        scores = X @ model.weights
    else:
        if X.shape[1] != model.train_X.shape[1]:
            raise DimensionError(
                f"model expects {model.train_X.shape[1]} features, got {X.shape[1]}"
            )
        scores = (X @ model.train_X.T) @ model.weights
    return PredictionScores.from_scores(scores)


def pseudo_label(scores: PredictionScores) -> np.ndarray:
    """Harden scores to one-hot rows at the (first) argmax."""
    return one_hot(scores.labels, scores.scores.shape[1])


def fit_transductive(
    X: np.ndarray,
    Y: np.ndarray,
    X_unlabeled: np.ndarray | None,
    beta: float,
    beta_prime: float,
    alpha: float,
) -> RidgeModel:
    """Two-stage semi-supervised ridge fit.

    Stage 1 fits a plain ridge on the labeled rows and hardens its
    predictions on the unlabeled rows; stage 2 solves the combined system
    with an identity regularizer of weight 1. The returned model's ``alpha``
    records the stage-1 value used for pseudo-labeling.
    """
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    if beta < 0 or beta_prime < 0:
        raise ValidationError("beta and beta_prime must be nonnegative")
    if beta_prime > 0 and (X_unlabeled is None or np.asarray(X_unlabeled).shape[0] == 0):
        raise ValidationError("beta_prime > 0 requires unlabeled rows")
    d = X.shape[1]
    G = beta * (X.T @ X)
    rhs = beta * (X.T @ Y)
    if beta_prime > 0:
        Xu = _as_matrix(X_unlabeled, "X_unlabeled")
        if Xu.shape[1] != d:
            raise DimensionError(
                f"unlabeled rows have {Xu.shape[1]} features, labeled have {d}"
            )
        stage1 = fit_ridge(X, Y, alpha)
        Yu = pseudo_label(predict(stage1, Xu))
        G = G + beta_prime * (Xu.T @ Xu)
        rhs = rhs + beta_prime * (Xu.T @ Yu)
    G[np.diag_indices_from(G)] += 1.0
    W = scipy.linalg.solve(G, rhs, assume_a="pos")
    return RidgeModel(mode="primal", weights=W, alpha=float(alpha),
                      class_count=Y.shape[1])


def _fold_indices(labels: np.ndarray, folds: int, seed: int, stratified: bool) -> list[np.ndarray]:
    """Seeded k-fold assignment; stratified spreads each class round-robin."""
    rng = np.random.default_rng(seed)
    assign = np.empty(labels.shape[0], dtype=np.intp)
    if stratified:
        for cls in np.unique(labels):
            idx = np.flatnonzero(labels == cls)
            rng.shuffle(idx)
            assign[idx] = np.arange(idx.size) % folds
    else:
        idx = np.arange(labels.shape[0])
        rng.shuffle(idx)
        assign[idx] = np.arange(idx.size) % folds
    return [np.flatnonzero(assign == f) for f in range(folds)]


def _cv_folds(Y: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    labels = np.argmax(Y, axis=1)
    smallest = np.min(np.bincount(labels, minlength=Y.shape[1])[np.unique(labels)])
    if smallest < folds:
        warnings.warn(
            f"a class has only {smallest} samples for {folds} folds; "
            "falling back to unstratified folds",
            RuntimeWarning,
            stacklevel=3,
        )
        return _fold_indices(labels, folds, seed, stratified=False)
    return _fold_indices(labels, folds, seed, stratified=True)


def _accuracy(pred_labels: np.ndarray, Y: np.ndarray) -> float:
    return float(np.mean(pred_labels == np.argmax(Y, axis=1)))


def cross_validate_alpha(
    X: np.ndarray,
    Y: np.ndarray,
    folds: int = 5,
    grid: tuple[float, ...] = DEFAULT_ALPHA_GRID,
    seed: int = 0,
) -> float:
    """Grid value with the best mean k-fold accuracy; ties favor larger alpha."""
    if folds < 2:
        raise ValidationError(f"need at least 2 folds, got {folds}")
    if len(grid) == 0:
        raise ValidationError("alpha grid is empty")
    if len(grid) == 1:
        return float(grid[0])
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    fold_idx = _cv_folds(Y, folds, seed)
    best_alpha, best_acc = None, -1.0
    for alpha in sorted(grid):
        accs = []
        for val in fold_idx:
            if val.size == 0:
                continue
            train = np.setdiff1d(np.arange(X.shape[0]), val, assume_unique=True)
            model = fit_ridge(X[train], Y[train], alpha)
            accs.append(_accuracy(predict(model, X[val]).labels, Y[val]))
        mean_acc = float(np.mean(accs))
        if mean_acc >= best_acc:  # ties resolve to the larger alpha
            best_alpha, best_acc = alpha, mean_acc
    return float(best_alpha)


def cross_validate_betas(
    X: np.ndarray,
    Y: np.ndarray,
    X_unlabeled: np.ndarray,
    folds: int = 5,
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID,
    beta_prime_grid: tuple[float, ...] = DEFAULT_BETA_GRID,
    alpha: float = 1e-3,
    seed: int = 0,
) -> tuple[float, float]:
    """Pair with the best mean labeled-fold accuracy; ties trust unlabeled less."""
    if folds < 2:
        raise ValidationError(f"need at least 2 folds, got {folds}")
    if len(beta_grid) == 0 or len(beta_prime_grid) == 0:
        raise ValidationError("beta grids must be nonempty")
    X = _as_matrix(X, "X")
    Y = _as_matrix(Y, "Y")
    fold_idx = _cv_folds(Y, folds, seed)
    best, best_acc = None, -1.0
    # iterate smallest beta_prime (then beta) first, keep strict improvements,
    # so ties land on the least unlabeled-reliant pair
    for beta_prime in sorted(beta_prime_grid):
        for beta in sorted(beta_grid):
            accs = []
            for val in fold_idx:
                if val.size == 0:
                    continue
                train = np.setdiff1d(np.arange(X.shape[0]), val, assume_unique=True)
                model = fit_transductive(X[train], Y[train], X_unlabeled,
                                         beta, beta_prime, alpha)
                accs.append(_accuracy(predict(model, X[val]).labels, Y[val]))
            mean_acc = float(np.mean(accs))
            if mean_acc > best_acc:
                best, best_acc = (float(beta), float(beta_prime)), mean_acc
    return best


def save_model(model: RidgeModel, path: str) -> None:
    """Write the model as a little-endian binary blob plus a JSON sidecar.

    Layout: magic, version, mode byte, class count, alpha, temperature
    (NaN when unset), shape header, then the row-major float64 payloads
    (weights, and training features for dual models).
    """
    arrays = [np.ascontiguousarray(model.weights, dtype="<f8")]
    if model.mode == "dual":
        arrays.append(np.ascontiguousarray(model.train_X, dtype="<f8"))
    temp = float("nan") if model.temperature is None else float(model.temperature)
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<IBIdd", _MODEL_VERSION,
                             0 if model.mode == "primal" else 1,
                             model.class_count, model.alpha, temp))
        fh.write(struct.pack("<I", len(arrays)))
        for arr in arrays:
            fh.write(struct.pack("<QQ", *arr.shape))
        for arr in arrays:
            fh.write(arr.tobytes())
    meta = {
        "format": "sketchfer-ridge-v1",
        "mode": model.mode,
        "alpha": model.alpha,
        "class_count": model.class_count,
        "temperature": model.temperature,
        "shapes": [list(a.shape) for a in arrays],
        "dtype": "<f8",
    }
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path: str) -> RidgeModel:
    """Read a model written by :func:`save_model`."""
    with open(path, "rb") as fh:
        if fh.read(len(_MODEL_MAGIC)) != _MODEL_MAGIC:
            raise ValidationError(f"{path}: not a ridge model file")
        version, mode_byte, class_count, alpha, temp = struct.unpack(
            "<IBIdd", fh.read(struct.calcsize("<IBIdd")))
        if version != _MODEL_VERSION:
            raise ValidationError(f"{path}: unsupported model version {version}")
        (n_arrays,) = struct.unpack("<I", fh.read(4))
        shapes = [struct.unpack("<QQ", fh.read(16)) for _ in range(n_arrays)]
        arrays = []
        for shape in shapes:
            count = shape[0] * shape[1]
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValidationError(f"{path}: truncated payload")
            arrays.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
    mode = "primal" if mode_byte == 0 else "dual"
    if mode == "dual" and len(arrays) != 2:
        raise ValidationError(f"{path}: dual model requires two arrays")
    for arr in arrays:
        check_finite(arr, path)
    return RidgeModel(mode=mode, weights=arrays[0], alpha=alpha,
                      class_count=class_count,
                      train_X=arrays[1] if mode == "dual" else None,
                      temperature=None if np.isnan(temp) else temp)
