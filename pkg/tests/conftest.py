import json
import os

import numpy as np
import pytest

from sketchfer import read_array, synth_features, write_array


@pytest.fixture(scope="session")
def layered_dataset(tmp_path_factory):
    """Four layers, signal split between layers 1 and 2, weak raw input."""
    out = str(tmp_path_factory.mktemp("data") / "layered")
    return synth_features(out, seed=11, n_train=240, n_test=120,
                          layer_dims=(24, 32, 40, 28), n_classes=4,
                          signal_layers={1: 6.0, 2: 4.0}, raw_dim=16,
                          raw_signal=1.2)


def subset_manifest(src_manifest, rows, out_dir):
    """Write a manifest holding only the given training rows of another."""
    with open(src_manifest) as fh:
        doc = json.load(fh)
    src_dir = os.path.dirname(src_manifest)
    os.makedirs(out_dir, exist_ok=True)
    rows = np.asarray(rows)

    def copy(rel, take_rows):
        arr = read_array(os.path.join(src_dir, rel))
        if take_rows is not None:
            arr = arr[take_rows]
        write_array(os.path.join(out_dir, rel), arr)

    for layer in doc["layers"]:
        copy(layer["train"], rows)
        copy(layer["test"], None)
    copy(doc["labels"]["train"], rows)
    copy(doc["labels"]["test"], None)
    if "raw_input" in doc:
        copy(doc["raw_input"]["train"], rows)
        copy(doc["raw_input"]["test"], None)
    doc["n_train"] = int(rows.size)
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return path
