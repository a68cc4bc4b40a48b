import json
import os

import numpy as np
import pytest

from sketchfer import (
    ManifestError,
    load_manifest,
    read_array,
    synth_features,
    write_array,
)

DATA_ARGS = dict(seed=1, n_train=30, n_test=12, layer_dims=(4, 6),
                 n_classes=3, raw_dim=5)


@pytest.fixture()
def dataset(tmp_path):
    return synth_features(str(tmp_path / "data"), **DATA_ARGS)


def rewrite(manifest_path, mutate):
    with open(manifest_path) as fh:
        doc = json.load(fh)
    mutate(doc)
    with open(manifest_path, "w") as fh:
        json.dump(doc, fh)


class TestArrayIO:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((7, 3)).astype(np.float32)
        path = str(tmp_path / "a.npy")
        write_array(path, arr)
        back = read_array(path)
        assert back.dtype == np.float32
        np.testing.assert_array_equal(back, arr)

    def test_write_replaces_atomically(self, tmp_path):
        path = str(tmp_path / "a.npy")
        write_array(path, np.zeros(3))
        write_array(path, np.ones(3))
        np.testing.assert_array_equal(read_array(path), np.ones(3))
        leftovers = [f for f in os.listdir(tmp_path) if f.endswith(".tmp")]
        assert leftovers == []

    def test_read_missing_file(self, tmp_path):
        with pytest.raises(ManifestError):
            read_array(str(tmp_path / "nope.npy"))

    def test_read_corrupt_file(self, tmp_path):
        path = tmp_path / "bad.npy"
        path.write_bytes(b"this is not an array")
        with pytest.raises(ManifestError):
            read_array(str(path))


class TestLoadManifest:
    def test_round_trip(self, dataset):
        man = load_manifest(dataset)
        assert man.n_train == 30 and man.n_test == 12
        assert man.n_classes == 3 and man.n_layers == 2
        assert [l.d for l in man.layers] == [4, 6]
        assert man.raw_input is not None and man.raw_input.d == 5
        X = read_array(man.layers[0].train)
        assert X.shape == (30, 4)
        y = read_array(man.labels_train)
        assert y.shape == (30,) and y.min() >= 0 and y.max() < 3

    def test_paths_resolve_relative_to_manifest(self, dataset):
        man = load_manifest(dataset)
        for l in man.layers:
            assert os.path.isabs(l.train) or os.path.exists(l.train)

    def test_missing_layer_file(self, dataset):
        os.remove(os.path.join(os.path.dirname(dataset), "layer1_train.npy"))
        with pytest.raises(ManifestError):
            load_manifest(dataset)

    def test_wrong_shape_rejected(self, dataset):
        path = os.path.join(os.path.dirname(dataset), "layer0_train.npy")
        write_array(path, np.zeros((30, 5), dtype=np.float32))
        with pytest.raises(ManifestError):
            load_manifest(dataset)

    def test_nonfinite_values_rejected(self, dataset):
        path = os.path.join(os.path.dirname(dataset), "layer0_test.npy")
        X = read_array(path).copy()
        X[0, 0] = np.nan
        write_array(path, X)
        with pytest.raises(ManifestError):
            load_manifest(dataset)

    def test_float_labels_rejected(self, dataset):
        path = os.path.join(os.path.dirname(dataset), "labels_train.npy")
        write_array(path, np.zeros(30, dtype=np.float64))
        with pytest.raises(ManifestError):
            load_manifest(dataset)

    def test_out_of_range_labels_rejected(self, dataset):
        path = os.path.join(os.path.dirname(dataset), "labels_test.npy")
        y = read_array(path).copy()
        y[0] = 3
        write_array(path, y)
        with pytest.raises(ManifestError):
            load_manifest(dataset)

    def test_empty_layer_list_rejected(self, dataset):
        rewrite(dataset, lambda doc: doc.update(layers=[]))
        with pytest.raises(ManifestError):
            load_manifest(dataset)

    def test_missing_required_key_rejected(self, dataset):
        rewrite(dataset, lambda doc: doc.pop("n_classes"))
        with pytest.raises(ManifestError):
            load_manifest(dataset)

    def test_unknown_dtype_rejected(self, dataset):
        rewrite(dataset, lambda doc: doc.update(dtype="int8"))
        with pytest.raises(ManifestError):
            load_manifest(dataset)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json")
        with pytest.raises(ManifestError):
            load_manifest(str(path))

    def test_missing_manifest_rejected(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(str(tmp_path / "missing.json"))

    def test_raw_input_optional(self, dataset):
        rewrite(dataset, lambda doc: doc.pop("raw_input"))
        man = load_manifest(dataset)
        assert man.raw_input is None
