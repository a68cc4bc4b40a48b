import numpy as np
import pytest

from sketchfer import (
    DimensionError,
    identity_sketch,
    make_sketch,
    materialize,
    sketch_features,
    sketch_rows,
)


def random_dims(rng):
    s = int(rng.integers(1, 5))
    m = s * int(rng.integers(1, 17))
    n = int(rng.integers(1, 120))
    d = int(rng.integers(1, 24))
    return n, d, m, s


class TestMakeSketch:
    def test_single_item_unit_scaling(self):
        spec = make_sketch(seed=7, n_input=1, n_buckets=4, n_stacks=4)
        S = materialize(spec).toarray()
        # one entry per stack, each +-1/sqrt(4)
        assert S.shape == (4, 1)
        nz = S[S != 0]
        assert nz.size == 4
        assert np.allclose(np.abs(nz), 0.5)

    def test_indivisible_buckets_rejected(self):
        with pytest.raises(DimensionError):
            make_sketch(seed=7, n_input=100, n_buckets=6, n_stacks=4)

    @pytest.mark.parametrize("bad", [(0, 4, 4), (10, 0, 1), (10, 2, 4)])
    def test_invalid_dimensions(self, bad):
        n, m, s = bad
        with pytest.raises(DimensionError):
            make_sketch(seed=1, n_input=n, n_buckets=m, n_stacks=s)

    def test_deterministic_assignments(self):
        a = make_sketch(seed=7, n_input=1000, n_buckets=256, n_stacks=4)
        b = make_sketch(seed=7, n_input=1000, n_buckets=256, n_stacks=4)
        items = np.arange(1000)
        sa, ga = a.assignments(items)
        sb, gb = b.assignments(items)
        assert np.array_equal(sa, sb)
        assert np.array_equal(ga, gb)

    def test_seed_changes_assignments(self):
        items = np.arange(500)
        s0, _ = make_sketch(0, 500, 64, 4).assignments(items)
        s1, _ = make_sketch(1, 500, 64, 4).assignments(items)
        assert not np.array_equal(s0, s1)


class TestSketchRows:
    def test_injective_stack_recovers_rows(self):
        # Force injectivity with the identity escape hatch: every output
        # bucket is +- one input row / sqrt(s) with s=1.
        n = 3
        spec = identity_sketch(n)
        X = np.diag([1.0, 2.0, 3.0])
        out = sketch_rows(spec, X)
        assert np.array_equal(out, X)

    def test_block_invariance_bitwise(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((64, 7))
        # single bucket per stack maximizes collisions, the adversarial case
        spec = make_sketch(seed=11, n_input=64, n_buckets=4, n_stacks=4)
        whole = sketch_rows(spec, X)
        rowwise = sketch_rows(spec, lambda: (X[i:i + 1] for i in range(64)))
        ragged = sketch_rows(spec, lambda: (X[0:5], X[5:40], X[40:64]))
        assert np.array_equal(whole, rowwise)
        assert np.array_equal(whole, ragged)

    def test_row_count_mismatch(self):
        spec = make_sketch(seed=0, n_input=10, n_buckets=4, n_stacks=2)
        X = np.ones((9, 3))
        with pytest.raises(DimensionError):
            sketch_rows(spec, X)
        with pytest.raises(DimensionError):
            sketch_rows(spec, np.ones((11, 3)))

    def test_linearity_exact_on_integer_data(self):
        rng = np.random.default_rng(5)
        X = rng.integers(-8, 9, size=(40, 6)).astype(float)
        Z = rng.integers(-8, 9, size=(40, 6)).astype(float)
        spec = make_sketch(seed=2, n_input=40, n_buckets=16, n_stacks=4)
        lhs = sketch_rows(spec, 3.0 * X + 2.0 * Z)
        rhs = 3.0 * sketch_rows(spec, X) + 2.0 * sketch_rows(spec, Z)
        # integer-valued data keeps every float op exact
        assert np.array_equal(lhs, rhs)

    def test_linearity_float_data(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((50, 5))
        Z = rng.standard_normal((50, 5))
        spec = make_sketch(seed=9, n_input=50, n_buckets=20, n_stacks=4)
        lhs = sketch_rows(spec, 0.7 * X - 1.3 * Z)
        rhs = 0.7 * sketch_rows(spec, X) - 1.3 * sketch_rows(spec, Z)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_monte_carlo_unbiasedness(self):
        # Mean of sketched inner products over many seeds approaches the true
        # inner product; pairs are correlated so the target is well away from 0.
        rng = np.random.default_rng(2024)
        n, n_pairs = 64, 20
        xs = rng.standard_normal((n_pairs, n))
        ys = xs + 0.5 * rng.standard_normal((n_pairs, n))
        truth = np.einsum("ij,ij->i", xs, ys)
        assert np.all(np.abs(truth) > 20)
        cols = np.vstack([xs, ys]).T  # (n, 2*n_pairs)
        acc = np.zeros(n_pairs)
        n_seeds = 1000
        for seed in range(n_seeds):
            spec = make_sketch(seed=seed, n_input=n, n_buckets=32, n_stacks=4)
            sk = sketch_rows(spec, cols)
            acc += np.einsum("ij,ij->j", sk[:, :n_pairs], sk[:, n_pairs:])
        rel = np.abs(acc / n_seeds - truth) / np.abs(truth)
        assert np.all(rel < 0.05)


class TestSketchFeatures:
    def test_single_nonzero_column(self):
        d = 8
        spec = make_sketch(seed=4, n_input=d, n_buckets=4, n_stacks=2)
        X = np.zeros((5, d))
        c = 3
        X[:, c] = np.arange(1.0, 6.0)
        out = sketch_features(spec, X)
        slots, signs = spec.assignments(np.array([c]))
        expect = np.zeros((5, 4))
        for j in range(2):
            expect[:, slots[j, 0]] += signs[j, 0] * spec.scale * X[:, c]
        np.testing.assert_allclose(out, expect, atol=1e-15)

    def test_matches_transposed_row_sketch(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((30, 17))
        spec = make_sketch(seed=13, n_input=17, n_buckets=8, n_stacks=4)
        direct = sketch_features(spec, X)
        via_rows = sketch_rows(spec, X.T).T
        np.testing.assert_allclose(direct, via_rows, atol=1e-12)

    def test_output_shape_at_production_dims(self):
        spec = make_sketch(seed=0, n_input=2048, n_buckets=512, n_stacks=4)
        X = np.zeros((3, 2048))
        assert sketch_features(spec, X).shape == (3, 512)

    def test_dimension_mismatch(self):
        spec = make_sketch(seed=0, n_input=10, n_buckets=4, n_stacks=2)
        with pytest.raises(DimensionError):
            sketch_features(spec, np.ones((3, 9)))


class TestMaterialize:
    def test_column_structure(self):
        spec = make_sketch(seed=21, n_input=50, n_buckets=12, n_stacks=4)
        S = materialize(spec).toarray()
        nnz = (S != 0).sum(axis=0)
        assert np.all(nnz == 4)
        np.testing.assert_allclose((S ** 2).sum(axis=0), 1.0, atol=1e-12)

    def test_equals_streaming_application(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n, d, m, s = random_dims(rng)
            spec = make_sketch(seed=int(rng.integers(2**32)), n_input=n,
                               n_buckets=m, n_stacks=s)
            X = rng.standard_normal((n, d))
            S = materialize(spec)
            assert np.max(np.abs(S @ X - sketch_rows(spec, X))) < 1e-12

    def test_too_large_guard(self):
        spec = make_sketch(seed=0, n_input=5_000_001, n_buckets=8, n_stacks=2)
        with pytest.raises(DimensionError):
            materialize(spec)

    def test_identity_kind(self):
        spec = identity_sketch(6)
        S = materialize(spec).toarray()
        assert np.array_equal(S, np.eye(6))
