import numpy as np
import pytest

from sketchfer import (
    AlignmentProblem,
    AlignmentWeights,
    DegenerateInputError,
    LowRankFeatures,
    ValidationError,
    alignment_score,
    build_gram_stats,
    concat_weighted,
    r_squared_diagnostic,
    solve_nn_quadratic,
)
from sketchfer._util import one_hot


def feats(data, layer_id=0):
    data = np.asarray(data, dtype=np.float64)
    return LowRankFeatures(data=data, layer_id=layer_id,
                           kept_rank=data.shape[1], eig_tol=1e-10,
                           projector=np.empty((0, 0)))


def weights_of(mu):
    mu = np.asarray(mu, dtype=np.float64)
    return AlignmentWeights(mu=mu, support=np.flatnonzero(mu),
                            objective=0.0, scale=1.0)


def random_problem(rng, n_layers):
    # entrywise nonnegative (norms squared) and PSD, like real stats
    A = np.abs(rng.standard_normal((n_layers, n_layers + 2)))
    M = A @ A.T + n_layers * np.eye(n_layers)
    a = rng.uniform(0.1, 2.0, size=n_layers)
    return AlignmentProblem(gram_stats=M, target_stats=a)


def grid_best_score(M, a, n=400):
    """Best alignment over a dense grid of unit nonnegative vectors."""
    L = M.shape[0]
    if L == 2:
        theta = np.linspace(0, np.pi / 2, n * n)
        V = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    else:
        t = np.linspace(0, np.pi / 2, n)
        t1, t2 = np.meshgrid(t, t, indexing="ij")
        V = np.stack([np.cos(t1.ravel()),
                      np.sin(t1.ravel()) * np.cos(t2.ravel()),
                      np.sin(t1.ravel()) * np.sin(t2.ravel())], axis=1)
    num = V @ a
    den = np.sqrt(np.einsum("ij,jk,ik->i", V, M, V))
    return float(np.max(num / den))


class TestBuildGramStats:
    def test_orthonormal_single_layer(self):
        # X with orthonormal columns: ||X^T X||_F^2 equals the column count
        N, r = 12, 3
        Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((N, r)))
        Y = one_hot(np.arange(N) % 2, 2)
        problem = build_gram_stats([feats(Q)], Y)
        np.testing.assert_allclose(problem.gram_stats, [[float(r)]], atol=1e-12)

    def test_disjoint_layers_have_zero_cross_term(self):
        N = 8
        F0 = np.zeros((N, 2))
        F0[:, 0] = np.arange(N)
        F1 = np.zeros((N, 2))
        F1[:, 1] = 1.0
        F0[:, 1] = 0.0
        # make the two layers column-orthogonal
        F0[:, 0] -= F0[:, 0].mean()
        Y = one_hot(np.arange(N) % 2, 2)
        problem = build_gram_stats([feats(F0), feats(F1, 1)], Y)
        assert problem.gram_stats[0, 1] == pytest.approx(0.0, abs=1e-12)

    def test_matches_trace_oracle(self):
        rng = np.random.default_rng(1)
        N = 20
        layers = [rng.standard_normal((N, r)) for r in (3, 5, 4)]
        y = rng.integers(0, 3, size=N)
        y[:3] = [0, 1, 2]
        Y = one_hot(y, 3)
        problem = build_gram_stats([feats(F, i) for i, F in enumerate(layers)], Y)
        kernels = [F @ F.T for F in layers]
        for k in range(3):
            for l in range(3):
                expected = np.trace(kernels[k] @ kernels[l])
                assert problem.gram_stats[k, l] == pytest.approx(expected, rel=1e-10)
            expected_a = np.trace(kernels[k] @ Y @ Y.T)
            assert problem.target_stats[k] == pytest.approx(expected_a, rel=1e-10)

    def test_row_count_mismatch_rejected(self):
        Y = one_hot(np.array([0, 1]), 2)
        with pytest.raises(ValidationError):
            build_gram_stats([feats(np.ones((2, 1))), feats(np.ones((3, 1)))], Y)

    def test_requires_one_hot_targets(self):
        with pytest.raises(ValidationError):
            build_gram_stats([feats(np.ones((2, 1)))],
                             np.array([[0.5, 0.5], [1.0, 0.0]]))


class TestAlignmentProblem:
    def test_rejects_asymmetric_stats(self):
        with pytest.raises(ValidationError):
            AlignmentProblem(gram_stats=np.array([[1.0, 2.0], [0.0, 1.0]]),
                             target_stats=np.ones(2))

    def test_rejects_negative_target_stats(self):
        with pytest.raises(ValidationError):
            AlignmentProblem(gram_stats=np.eye(2),
                             target_stats=np.array([1.0, -0.1]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValidationError):
            AlignmentProblem(gram_stats=np.eye(2), target_stats=np.ones(3))


class TestSolveNnQuadratic:
    def test_single_layer(self):
        problem = AlignmentProblem(gram_stats=np.array([[3.0]]),
                                   target_stats=np.array([2.0]))
        w = solve_nn_quadratic(problem)
        np.testing.assert_allclose(w.mu, [1.0])
        assert list(w.support) == [0]

    def test_inactive_layer_dropped(self):
        problem = AlignmentProblem(gram_stats=np.eye(2),
                                   target_stats=np.array([1.0, 0.0]))
        w = solve_nn_quadratic(problem)
        np.testing.assert_allclose(w.mu, [1.0, 0.0], atol=1e-12)
        assert list(w.support) == [0]

    @pytest.mark.parametrize("n_layers", [2, 3])
    def test_beats_dense_grid(self, n_layers):
        rng = np.random.default_rng(42)
        for _ in range(25):
            problem = random_problem(rng, n_layers)
            w = solve_nn_quadratic(problem)
            oracle = grid_best_score(problem.gram_stats, problem.target_stats)
            assert w.objective >= oracle - 1e-6

    @pytest.mark.parametrize("n_layers", [2, 3])
    def test_kkt_residual(self, n_layers):
        rng = np.random.default_rng(7)
        for _ in range(25):
            problem = random_problem(rng, n_layers)
            w = solve_nn_quadratic(problem)
            v = w.scale * w.mu
            grad = 2.0 * (problem.gram_stats @ v - problem.target_stats)
            gscale = max(1.0, float(np.max(np.abs(problem.target_stats))))
            active = v > 0
            assert np.all(np.abs(grad[active]) <= 1e-8 * gscale)
            assert np.all(grad[~active] >= -1e-8 * gscale)

    def test_weights_unit_norm_and_nonnegative(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            w = solve_nn_quadratic(random_problem(rng, 4))
            assert np.all(w.mu >= 0)
            assert np.linalg.norm(w.mu) == pytest.approx(1.0, abs=1e-12)

    def test_scale_invariance(self):
        # rescaling all features by c multiplies (M, a) by (c^4, c^2)
        rng = np.random.default_rng(9)
        problem = random_problem(rng, 3)
        c = 10.0
        scaled = AlignmentProblem(gram_stats=c**4 * problem.gram_stats,
                                  target_stats=c**2 * problem.target_stats)
        w1 = solve_nn_quadratic(problem)
        w2 = solve_nn_quadratic(scaled)
        np.testing.assert_allclose(w1.mu, w2.mu, atol=1e-8)

    def test_all_noise_rejected(self):
        problem = AlignmentProblem(gram_stats=np.eye(3),
                                   target_stats=np.zeros(3))
        with pytest.raises(DegenerateInputError):
            solve_nn_quadratic(problem)

    def test_iteration_cap_warns(self):
        rng = np.random.default_rng(11)
        problem = random_problem(rng, 3)
        with pytest.warns(RuntimeWarning):
            solve_nn_quadratic(problem, tol=0.0, max_iter=1)

    def test_objective_matches_score_of_mu(self):
        rng = np.random.default_rng(13)
        problem = random_problem(rng, 3)
        w = solve_nn_quadratic(problem)
        inner = float(w.mu @ problem.target_stats)
        norm = float(np.sqrt(w.mu @ problem.gram_stats @ w.mu))
        assert w.objective == pytest.approx(inner / norm, rel=1e-12)


class TestAlignmentScore:
    def test_ratio(self):
        assert alignment_score((3.0, 2.0)) == pytest.approx(1.5)

    def test_zero_norm_rejected(self):
        with pytest.raises(DegenerateInputError):
            alignment_score((1.0, 0.0))


class TestConcatWeighted:
    def test_kernel_is_weighted_sum(self):
        rng = np.random.default_rng(4)
        F0 = rng.standard_normal((10, 3))
        F1 = rng.standard_normal((10, 2))
        w = weights_of([0.8, 0.6])
        X_phi = concat_weighted([feats(F0), feats(F1, 1)], w)
        assert X_phi.shape == (10, 5)
        expected = 0.8 * F0 @ F0.T + 0.6 * F1 @ F1.T
        np.testing.assert_allclose(X_phi @ X_phi.T, expected, atol=1e-10)

    def test_only_selects_columns(self):
        rng = np.random.default_rng(5)
        F0 = rng.standard_normal((6, 2))
        F1 = rng.standard_normal((6, 3))
        w = weights_of([0.6, 0.8])
        both = concat_weighted([feats(F0), feats(F1, 1)], w)
        first = concat_weighted([feats(F0), feats(F1, 1)], w, only=[0])
        np.testing.assert_array_equal(first, both[:, :2])

    def test_only_outside_support_rejected(self):
        F = np.ones((4, 1))
        w = weights_of([1.0, 0.0])
        with pytest.raises(ValidationError):
            concat_weighted([feats(F), feats(F, 1)], w, only=[1])

    def test_empty_support_rejected(self):
        w = AlignmentWeights(mu=np.zeros(1), support=np.array([], dtype=int),
                             objective=0.0, scale=1.0)
        with pytest.raises(DegenerateInputError):
            concat_weighted([feats(np.ones((4, 1)))], w)


class TestRSquaredDiagnostic:
    def test_label_features_score_one(self):
        Y = one_hot(np.array([0, 0, 1, 1, 2, 2]), 3)
        assert r_squared_diagnostic(Y.copy(), Y) == pytest.approx(1.0)

    def test_label_orthogonal_features_score_zero(self):
        Y = one_hot(np.array([0, 0, 1, 1]), 2)
        X = np.array([[1.0], [-1.0], [2.0], [-2.0]])
        assert r_squared_diagnostic(X, Y) == pytest.approx(0.0, abs=1e-12)

    def test_matches_projection_oracle(self):
        rng = np.random.default_rng(6)
        y = np.array([0, 1, 2, 0, 1, 2, 0, 1])
        Y = one_hot(y, 3)
        X = rng.standard_normal((8, 4))
        counts = Y.sum(axis=0)
        Q = Y / np.sqrt(counts)
        expected = np.linalg.norm(Q @ (Q.T @ X)) ** 2 / np.linalg.norm(X) ** 2
        assert r_squared_diagnostic(X, Y) == pytest.approx(expected, rel=1e-10)

    def test_zero_features_score_zero(self):
        Y = one_hot(np.array([0, 1]), 2)
        assert r_squared_diagnostic(np.zeros((2, 3)), Y) == 0.0
