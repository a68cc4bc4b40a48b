"""Synthetic layered-feature datasets for tests and demos.

Generates a manifest plus array files that mimic what a frozen-network
extractor produces: several layers of features where only chosen layers
carry class signal (class means embedded in Gaussian noise) and the rest
are pure noise. A weaker copy of the signal goes into the optional raw-input
matrix so raw-feature baselines have something to work with but a clear
handicap. Fully seeded, so repeated calls write identical files.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ValidationError
from .manifest import write_array


def synth_features(
    out_dir: str,
    seed: int = 0,
    n_train: int = 1000,
    n_test: int = 500,
    layer_dims: tuple[int, ...] = (48, 64, 96, 80),
    n_classes: int = 5,
    signal_layers: dict[int, float] | None = None,
    noise: float = 1.0,
    raw_dim: int = 32,
    raw_signal: float = 0.6,
    dataset: str = "synthetic",
) -> str:
    """Write a synthetic feature dataset; returns the manifest path.

    ``signal_layers`` maps layer index to class-mean magnitude; unlisted
    layers get pure noise. Default puts magnitude 6 in layer 1 only.
    """
    if signal_layers is None:
        signal_layers = {1: 6.0}
    if len(layer_dims) == 0 or any(d < 1 for d in layer_dims):
        raise ValidationError(f"layer_dims must be positive, got {layer_dims}")
    if n_train < n_classes or n_classes < 2:
        raise ValidationError("need n_train >= n_classes >= 2")
    for l in signal_layers:
        if not 0 <= l < len(layer_dims):
            raise ValidationError(f"signal layer {l} out of range")
    os.makedirs(out_dir, exist_ok=True)
    rng = np.random.default_rng(seed)

    def labels_for(n: int) -> np.ndarray:
        lab = np.arange(n) % n_classes  # balanced
        rng.shuffle(lab)
        return lab.astype(np.int64)

    y_train = labels_for(n_train)
    y_test = labels_for(n_test)
    write_array(os.path.join(out_dir, "labels_train.npy"), y_train)
    write_array(os.path.join(out_dir, "labels_test.npy"), y_test)

    def class_means(d: int, magnitude: float) -> np.ndarray:
        m = rng.standard_normal((n_classes, d))
        m /= np.linalg.norm(m, axis=1, keepdims=True)
        return magnitude * m

    layers = []
    for l, d in enumerate(layer_dims):
        means = class_means(d, signal_layers.get(l, 0.0))
        for split, y in (("train", y_train), ("test", y_test)):
            X = means[y] + noise * rng.standard_normal((y.shape[0], d))
            write_array(os.path.join(out_dir, f"layer{l}_{split}.npy"),
                        X.astype(np.float32))
        layers.append({"id": l, "d": int(d),
                       "train": f"layer{l}_train.npy",
                       "test": f"layer{l}_test.npy"})

    raw_means = class_means(raw_dim, raw_signal)
    for split, y in (("train", y_train), ("test", y_test)):
        R = raw_means[y] + noise * rng.standard_normal((y.shape[0], raw_dim))
        write_array(os.path.join(out_dir, f"raw_{split}.npy"),
                    R.astype(np.float32))

    doc = {
        "dataset": dataset,
        "n_train": int(n_train),
        "n_test": int(n_test),
        "n_classes": int(n_classes),
        "dtype": "float32",
        "layers": layers,
        "labels": {"train": "labels_train.npy", "test": "labels_test.npy"},
        "raw_input": {"d": int(raw_dim), "train": "raw_train.npy",
                      "test": "raw_test.npy"},
        "producer": {
            "tool": "sketchfer.synth",
            "seed": int(seed),
            "signal_layers": {str(k): float(v) for k, v in sorted(signal_layers.items())},
            "noise": float(noise),
            "raw_signal": float(raw_signal),
        },
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    tmp = manifest_path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, manifest_path)
    return manifest_path
