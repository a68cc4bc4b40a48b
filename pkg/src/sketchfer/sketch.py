"""Implicit stacked-CountSketch operator.

A sketch maps ``n_input`` items (sample rows, or feature columns for the
random-projection baseline) into ``n_buckets`` output slots using
``n_stacks`` independent CountSketches stacked vertically. Stack ``j`` owns
the contiguous slot range ``[j*b, (j+1)*b)`` with ``b = n_buckets //
n_stacks``; every item lands in exactly one slot per stack with a random
sign, and contributions are scaled by ``1/sqrt(n_stacks)`` so that sketched
inner products are unbiased estimates of the original ones.

The operator is never materialized in production use: slot and sign of item
``i`` in stack ``j`` are a pure function of ``(seed, j, i)`` via a
counter-based hash, so memory stays O(1) and assignments are identical
across processes and platforms. :func:`materialize` builds the explicit
sparse matrix for small instances, as a test oracle.

Accumulation is performed in float64 and strictly in row order, which makes
the result bit-for-bit independent of how the input stream is partitioned
into blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

from ._util import BlockSource, _GOLDEN, iter_blocks, splitmix64
from .errors import DimensionError

_MATERIALIZE_LIMIT = 10_000_000  # max n_input * n_stacks entries


@dataclass(frozen=True)
class SketchSpec:
    """Deterministic description of a stacked CountSketch.

    ``kind`` is ``"hash"`` for the real operator. ``kind="identity"`` is an
    escape hatch for exactness tests (the sketch becomes the identity map;
    requires ``n_buckets == n_input`` and ``n_stacks == 1``).
    """

    seed: int
    n_input: int
    n_buckets: int
    n_stacks: int
    kind: str = "hash"

    @property
    def buckets_per_stack(self) -> int:
        return self.n_buckets // self.n_stacks

    @property
    def scale(self) -> float:
        return 1.0 / np.sqrt(self.n_stacks)

    def assignments(self, items: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Output slots and signs for the given item indices.

        Returns ``(slots, signs)``, each of shape ``(n_stacks, len(items))``;
        slots are absolute output indices (stack offset included), signs are
        unscaled +-1.
        """
        items = np.asarray(items, dtype=np.uint64)
        if self.kind == "identity":
            return items.astype(np.int64)[None, :], np.ones((1, items.shape[0]))
        b = np.uint64(self.buckets_per_stack)
        stacks = np.arange(self.n_stacks, dtype=np.uint64)[:, None]
        # Counter-based hash: the k-th output of the splitmix64 stream seeded
        # at `seed`, with k = stack * n_input + item + 1.
        counters = stacks * np.uint64(self.n_input) + items[None, :] + np.uint64(1)
        h = splitmix64(np.uint64(self.seed) + counters * _GOLDEN)
        # High bits pick the bucket, the low bit picks the sign.
        buckets = ((h >> np.uint64(32)) % b).astype(np.int64)
        slots = buckets + (stacks.astype(np.int64) * int(b))
        signs = 1.0 - 2.0 * (h & np.uint64(1)).astype(np.float64)
        return slots, signs


def make_sketch(seed: int, n_input: int, n_buckets: int, n_stacks: int = 4) -> SketchSpec:
    """Create a stacked-CountSketch spec after validating dimensions."""
    if n_stacks < 1 or n_buckets < n_stacks:
        raise DimensionError(
            f"need n_buckets >= n_stacks >= 1, got n_buckets={n_buckets}, n_stacks={n_stacks}"
        )
    if n_buckets % n_stacks != 0:
        raise DimensionError(
            f"n_buckets must be divisible by n_stacks ({n_buckets} % {n_stacks} != 0)"
        )
    if n_input < 1:
        raise DimensionError(f"n_input must be >= 1, got {n_input}")
    if not 0 <= int(seed) < 2**64:
        raise DimensionError("seed must fit in an unsigned 64-bit integer")
    return SketchSpec(seed=int(seed), n_input=int(n_input),
                      n_buckets=int(n_buckets), n_stacks=int(n_stacks))


def identity_sketch(n_input: int) -> SketchSpec:
    """Spec whose operator is exactly the identity (exactness-test escape hatch)."""
    if n_input < 1:
        raise DimensionError(f"n_input must be >= 1, got {n_input}")
    return SketchSpec(seed=0, n_input=n_input, n_buckets=n_input, n_stacks=1,
                      kind="identity")


def sketch_rows(spec: SketchSpec, blocks: BlockSource) -> np.ndarray:
    """Apply the sketch to the rows of a streamed matrix: returns S @ X.

    ``blocks`` may be the full matrix or any partition of it into consecutive
    row blocks; the result is bit-identical either way because each output
    slot accumulates its rows in global row order.
    """
    out = None
    n_cols = None
    offset = 0
    for block in iter_blocks(blocks):
        if n_cols is None:
            n_cols = block.shape[1]
            out = np.zeros((spec.n_buckets, n_cols))
        elif block.shape[1] != n_cols:
            raise DimensionError(
                f"inconsistent block widths: {block.shape[1]} after {n_cols}"
            )
        if offset + block.shape[0] > spec.n_input:
            raise DimensionError(
                f"stream exceeds spec.n_input={spec.n_input} rows"
            )
        slots, signs = spec.assignments(np.arange(offset, offset + block.shape[0]))
        blk = np.asarray(block, dtype=np.float64)
        for j in range(slots.shape[0]):
            np.add.at(out, slots[j], blk * (signs[j] * spec.scale)[:, None])
        offset += block.shape[0]
    if offset != spec.n_input:
        raise DimensionError(
            f"stream ended after {offset} rows, spec.n_input={spec.n_input}"
        )
    return out


def sketch_features(spec: SketchSpec, X: np.ndarray) -> np.ndarray:
    """Hash the columns of X into buckets: returns X @ S^T of shape (N, n_buckets).

    This is the random-projection baseline; the same hash family as
    :func:`sketch_rows`, applied on the feature side.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {X.shape}")
    if X.shape[1] != spec.n_input:
        raise DimensionError(
            f"spec hashes {spec.n_input} features but X has {X.shape[1]} columns"
        )
    out = np.zeros((spec.n_buckets, X.shape[0]))
    slots, signs = spec.assignments(np.arange(spec.n_input))
    XT = X.T
    for j in range(slots.shape[0]):
        np.add.at(out, slots[j], XT * (signs[j] * spec.scale)[:, None])
    return out.T


def materialize(spec: SketchSpec) -> scipy.sparse.csr_matrix:
    """Explicit sparse sketch matrix (n_buckets x n_input); test oracle only.

    Every column has exactly ``n_stacks`` nonzeros of magnitude
    ``1/sqrt(n_stacks)``, so its squared norm is 1.
    """
    if spec.n_input * spec.n_stacks > _MATERIALIZE_LIMIT:
        raise DimensionError(
            f"refusing to materialize {spec.n_input * spec.n_stacks} entries "
            f"(limit {_MATERIALIZE_LIMIT})"
        )
    items = np.arange(spec.n_input)
    slots, signs = spec.assignments(items)
    rows = slots.ravel()
    cols = np.tile(items, slots.shape[0])
    data = signs.ravel() * spec.scale
    S = scipy.sparse.coo_matrix((data, (rows, cols)),
                                shape=(spec.n_buckets, spec.n_input))
    return S.tocsr()
