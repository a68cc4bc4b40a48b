"""Expected calibration error and temperature scaling for classifier scores.

Raw ridge scores are not probabilities; they are mapped to confidences by a
row-wise softmax of scores / t. The temperature t rescales confidence
without ever changing the predicted label, and is chosen by grid search to
minimize the binned calibration error on the fitting split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .regression import PredictionScores

DEFAULT_N_BINS = 15


@dataclass(frozen=True)
class CalibrationReport:
    """Binned gap between confidence and accuracy.

    ``bin_counts``, ``bin_confidence`` and ``bin_accuracy`` have one entry
    per bin (zeros for empty bins); ``ece`` is the count-weighted mean
    absolute gap and is exactly recomputable from them.
    """

    ece: float
    n_bins: int
    bin_counts: np.ndarray
    bin_confidence: np.ndarray
    bin_accuracy: np.ndarray
    temperature: float | None = None


def _raw_scores(scores) -> np.ndarray:
    raw = scores.scores if isinstance(scores, PredictionScores) else scores
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise DimensionError(f"scores must be 2-D, got shape {raw.shape}")
    return raw


def scores_to_confidence(scores, t: float) -> np.ndarray:
    """Row-wise softmax of scores / t; rows sum to 1, argmax is preserved."""
    if t <= 0:
        raise ValidationError(f"temperature must be positive, got {t}")
    raw = _raw_scores(scores) / t
    raw -= raw.max(axis=1, keepdims=True)
    np.exp(raw, out=raw)
    raw /= raw.sum(axis=1, keepdims=True)
    return raw


def _bin_of(confidence: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin ids in 1..n_bins; bins are left-open right-closed, 0 joins bin 1."""
    edges = np.arange(n_bins + 1) / n_bins
    bins = np.searchsorted(edges, confidence, side="left")
    return np.clip(bins, 1, n_bins)


def ece(
    probabilities: np.ndarray,
    true_labels: np.ndarray,
    n_bins: int = DEFAULT_N_BINS,
    temperature: float | None = None,
) -> CalibrationReport:
    """Expected calibration error over equal-width confidence bins."""
    P = np.asarray(probabilities, dtype=np.float64)
    if P.ndim != 2:
        raise DimensionError(f"probabilities must be 2-D, got shape {P.shape}")
    if n_bins < 1:
        raise ValidationError(f"need at least one bin, got {n_bins}")
    if np.max(np.abs(P.sum(axis=1) - 1.0)) > 1e-6:
        raise ValidationError("probability rows must sum to 1")
    labels = np.asarray(true_labels)
    if labels.shape != (P.shape[0],):
        raise DimensionError(
            f"labels must have shape ({P.shape[0]},), got {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= P.shape[1]):
        raise ValidationError(
            f"labels must lie in [0, {P.shape[1]}), got "
            f"[{labels.min()}, {labels.max()}]"
        )
    confidence = P.max(axis=1)
    correct = (np.argmax(P, axis=1) == labels).astype(np.float64)
    bins = _bin_of(confidence, n_bins)
    counts = np.zeros(n_bins)
    conf_sum = np.zeros(n_bins)
    acc_sum = np.zeros(n_bins)
    np.add.at(counts, bins - 1, 1.0)
    np.add.at(conf_sum, bins - 1, confidence)
    np.add.at(acc_sum, bins - 1, correct)
    nonempty = counts > 0
    bin_conf = np.where(nonempty, conf_sum / np.maximum(counts, 1), 0.0)
    bin_acc = np.where(nonempty, acc_sum / np.maximum(counts, 1), 0.0)
    value = float(np.sum(counts / P.shape[0] * np.abs(bin_acc - bin_conf)))
    return CalibrationReport(ece=value, n_bins=n_bins, bin_counts=counts,
                             bin_confidence=bin_conf, bin_accuracy=bin_acc,
                             temperature=temperature)


def default_temperature_grid() -> np.ndarray:
    return np.geomspace(1e-2, 1e2, 50)


def fit_temperature(
    scores,
    labels: np.ndarray,
    grid: np.ndarray | None = None,
    n_bins: int = DEFAULT_N_BINS,
) -> float:
    """Grid temperature minimizing the calibration error on this data.

    t = 1 is always evaluated alongside the grid, and ties resolve to the
    value closest to 1, so the result never calibrates worse than t = 1.
    """
    raw = _raw_scores(scores)
    grid = default_temperature_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValidationError("temperature grid must be positive and nonempty")
    candidates = np.unique(np.append(grid, 1.0))
    best_t, best_ece = 1.0, np.inf
    for t in candidates:
        value = ece(scores_to_confidence(raw, float(t)), labels, n_bins).ece
        better = value < best_ece
        tie = value == best_ece and abs(np.log(t)) < abs(np.log(best_t))
        if better or tie:
            best_t, best_ece = float(t), value
    return best_t
