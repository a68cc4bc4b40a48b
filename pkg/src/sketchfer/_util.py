"""Small shared helpers: block streaming, one-hot labels, seed derivation."""

from __future__ import annotations

from typing import Callable, Iterable, Iterator, Union

import numpy as np

from .errors import DimensionError, ValidationError

# A block source is either an in-memory matrix or a factory producing a fresh
# iterator of row blocks each time it is called (needed for two-pass streaming).
BlockSource = Union[np.ndarray, Callable[[], Iterable[np.ndarray]]]

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x: np.ndarray) -> np.ndarray:
    """Finalizer of the splitmix64 generator, vectorized over uint64 arrays.

    Pure integer arithmetic, so results are identical across platforms and
    processes. Used as the counter-based hash underlying every sketch.
    """
    with np.errstate(over="ignore"):  # wraparound mod 2**64 is the point
        z = (x + _GOLDEN) & _MASK64
        z = ((z ^ (z >> np.uint64(30))) * _MIX1) & _MASK64
        z = ((z ^ (z >> np.uint64(27))) * _MIX2) & _MASK64
        return z ^ (z >> np.uint64(31))


def derive_seed(seed: int, *stream: int) -> int:
    """Derive an independent 64-bit sub-seed from ``seed`` and stream indices."""
    state = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    for s in stream:
        state = splitmix64(state ^ np.uint64((s + 1) & 0xFFFFFFFFFFFFFFFF))
    return int(state)


def iter_blocks(source: BlockSource, block_rows: int | None = None) -> Iterator[np.ndarray]:
    """Yield 2-D row blocks from an array or a block-iterator factory."""
    if isinstance(source, np.ndarray):
        if source.ndim != 2:
            raise DimensionError(f"expected a 2-D matrix, got shape {source.shape}")
        if block_rows is None or block_rows >= source.shape[0]:
            yield source
        else:
            for start in range(0, source.shape[0], block_rows):
                yield source[start:start + block_rows]
        return
    for block in source():
        block = np.asarray(block)
        if block.ndim != 2:
            raise DimensionError(f"streamed block must be 2-D, got shape {block.shape}")
        yield block


def one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Encode integer class ids as an N x c one-hot float matrix."""
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise DimensionError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValidationError(
            f"label ids must lie in [0, {n_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    Y = np.zeros((labels.shape[0], n_classes))
    Y[np.arange(labels.shape[0]), labels.astype(np.intp)] = 1.0
    return Y


def validate_one_hot(Y: np.ndarray) -> np.ndarray:
    """Check each row is exactly one-hot; returns Y as float64."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise DimensionError(f"label matrix must be 2-D, got shape {Y.shape}")
    ok = np.all(np.isin(Y, (0.0, 1.0))) and np.all(Y.sum(axis=1) == 1.0)
    if not ok:
        raise ValidationError("label matrix rows must each contain a single 1 and zeros elsewhere")
    return Y


def check_finite(a: np.ndarray, what: str) -> np.ndarray:
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{what} contains non-finite entries")
    return a
