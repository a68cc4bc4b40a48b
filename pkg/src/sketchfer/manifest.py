"""Dataset manifests and array-file IO.

A manifest is a JSON index of per-layer feature files: each layer has a
train and a test matrix of shape (n_train, d) and (n_test, d), labels are
integer class-id vectors, and an optional raw-input entry carries the
pre-network vectors used by the multi-bandwidth baseline. File paths are
relative to the manifest's directory. Validation is eager: every referenced
file must exist, match its declared shape, and contain only finite values.

Arrays are stored in the standard NPY binary format (magic + header with
dtype/shape + little-endian payload) via numpy's reader and writer; writes
go through a temp file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ManifestError

_ALLOWED_DTYPES = ("float32", "float64")


def read_array(path: str) -> np.ndarray:
    """Load an NPY array file (no pickled objects accepted)."""
    try:
        return np.load(path, allow_pickle=False)
    except FileNotFoundError:
        raise ManifestError(f"array file not found: {path}") from None
    except ValueError as exc:
        raise ManifestError(f"{path}: not a valid array file ({exc})") from None


def write_array(path: str, arr: np.ndarray) -> None:
    """Write an NPY array file atomically (temp file + rename)."""
    arr = np.asarray(arr)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".npy.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.save(fh, arr, allow_pickle=False)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class LayerEntry:
    """One layer's feature files; paths are absolute after loading."""

    id: int
    d: int
    train: str
    test: str


@dataclass(frozen=True)
class RawInputEntry:
    """Optional pre-network input vectors for raw-feature baselines."""

    d: int
    train: str
    test: str


@dataclass(frozen=True)
class Manifest:
    """Validated index of a feature dataset."""

    dataset: str
    n_train: int
    n_test: int
    n_classes: int
    dtype: str
    layers: list[LayerEntry]
    labels_train: str
    labels_test: str
    raw_input: RawInputEntry | None = None
    producer: dict = field(default_factory=dict)
    path: str = ""

    @property
    def n_layers(self) -> int:
        return len(self.layers)


def _require(doc: dict, key: str, path: str):
    if key not in doc:
        raise ManifestError(f"{path}: missing required field {key!r}")
    return doc[key]


def _load_readonly(path: str, what: str) -> np.ndarray:
    try:
        return np.load(path, mmap_mode="r", allow_pickle=False)
    except (ValueError, OSError) as exc:
        raise ManifestError(f"{what}: cannot read {path}: {exc}") from None


def _check_matrix(path: str, expect_shape: tuple[int, int], what: str) -> None:
    if not os.path.exists(path):
        raise ManifestError(f"{what}: file not found: {path}")
    arr = _load_readonly(path, what)
    if arr.shape != expect_shape:
        raise ManifestError(
            f"{what}: expected shape {expect_shape}, file has {arr.shape}"
        )
    if arr.dtype.kind != "f":
        raise ManifestError(f"{what}: expected a float array, got dtype {arr.dtype}")
    if not np.all(np.isfinite(arr)):
        raise ManifestError(f"{what}: contains non-finite values")


def _check_labels(path: str, n: int, n_classes: int, what: str) -> None:
    if not os.path.exists(path):
        raise ManifestError(f"{what}: file not found: {path}")
    arr = _load_readonly(path, what)
    if arr.shape != (n,):
        raise ManifestError(f"{what}: expected shape ({n},), file has {arr.shape}")
    if arr.dtype.kind not in "iu":
        raise ManifestError(f"{what}: labels must be integers, got dtype {arr.dtype}")
    if arr.size and (int(arr.min()) < 0 or int(arr.max()) >= n_classes):
        raise ManifestError(
            f"{what}: label values must lie in [0, {n_classes}), got "
            f"[{int(arr.min())}, {int(arr.max())}]"
        )


def load_manifest(path: str) -> Manifest:
    """Parse and eagerly validate a manifest file."""
    if not os.path.exists(path):
        raise ManifestError(f"manifest not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ManifestError(f"{path}: manifest must be a JSON object")
    base = os.path.dirname(os.path.abspath(path))

    def resolve(rel: str) -> str:
        return os.path.normpath(os.path.join(base, rel))

    n_train = int(_require(doc, "n_train", path))
    n_test = int(_require(doc, "n_test", path))
    n_classes = int(_require(doc, "n_classes", path))
    dtype = str(doc.get("dtype", "float32"))
    if n_train < 1 or n_test < 0 or n_classes < 2:
        raise ManifestError(
            f"{path}: need n_train >= 1, n_test >= 0, n_classes >= 2"
        )
    if dtype not in _ALLOWED_DTYPES:
        raise ManifestError(
            f"{path}: dtype must be one of {_ALLOWED_DTYPES}, got {dtype!r}"
        )
    raw_layers = _require(doc, "layers", path)
    if not isinstance(raw_layers, list) or len(raw_layers) == 0:
        raise ManifestError(f"{path}: layers must be a nonempty list")
    layers = []
    for i, entry in enumerate(raw_layers):
        layer_id = int(entry.get("id", i))
        d = int(_require(entry, "d", f"{path} layer {layer_id}"))
        train = resolve(_require(entry, "train", f"{path} layer {layer_id}"))
        test = resolve(_require(entry, "test", f"{path} layer {layer_id}"))
        _check_matrix(train, (n_train, d), f"layer {layer_id} train features")
        _check_matrix(test, (n_test, d), f"layer {layer_id} test features")
        layers.append(LayerEntry(id=layer_id, d=d, train=train, test=test))
    labels = _require(doc, "labels", path)
    labels_train = resolve(_require(labels, "train", f"{path} labels"))
    labels_test = resolve(_require(labels, "test", f"{path} labels"))
    _check_labels(labels_train, n_train, n_classes, "train labels")
    _check_labels(labels_test, n_test, n_classes, "test labels")
    raw_input = None
    if "raw_input" in doc and doc["raw_input"] is not None:
        entry = doc["raw_input"]
        d = int(_require(entry, "d", f"{path} raw_input"))
        train = resolve(_require(entry, "train", f"{path} raw_input"))
        test = resolve(_require(entry, "test", f"{path} raw_input"))
        _check_matrix(train, (n_train, d), "raw input train")
        _check_matrix(test, (n_test, d), "raw input test")
        raw_input = RawInputEntry(d=d, train=train, test=test)
    return Manifest(
        dataset=str(doc.get("dataset", "unnamed")),
        n_train=n_train, n_test=n_test, n_classes=n_classes, dtype=dtype,
        layers=layers, labels_train=labels_train, labels_test=labels_test,
        raw_input=raw_input, producer=dict(doc.get("producer", {})),
        path=os.path.abspath(path),
    )
