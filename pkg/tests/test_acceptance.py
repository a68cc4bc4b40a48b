"""Acceptance gate: every contract the library must honor, one test each.

Each test prints one ACCEPTANCE line naming the guarantee and runs it at
the tolerance the guarantee states. Keep these self-contained; they are the
first thing to run after any refactor.
"""

import json
import time

import numpy as np
import pytest

from sketchfer import (
    RunConfig,
    ece,
    fit_ridge,
    fit_rbf_nystrom,
    fit_temperature,
    fit_transductive,
    identity_sketch,
    make_sketch,
    materialize,
    nystrom_linear_features,
    predict,
    rbf_sigma_heuristic,
    run,
    scores_to_confidence,
    sketch_rows,
    solve_nn_quadratic,
    synth_features,
    transform,
)
from test_alignment import grid_best_score, random_problem
from test_calibration import ece_oracle


def passed(name, detail=""):
    print(f"ACCEPTANCE {name}: PASS {detail}".rstrip())


@pytest.fixture(scope="module")
def endtoend_dataset(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("accept") / "e2e")
    return synth_features(out, seed=0, n_train=1000, n_test=500,
                          layer_dims=(48, 64, 96, 80), n_classes=5,
                          signal_layers={0: 2.2, 1: 3.0, 2: 2.6},
                          raw_dim=32)


class TestSketchContracts:
    def test_inner_products_unbiased(self):
        # 64 rows sketched to 32: the mean sketched Gram over 1000 seeds
        # recovers 20 fixed column inner products within 5%, in under 10s
        rng = np.random.default_rng(0)
        n, d, m = 64, 16, 32
        X = rng.standard_normal(n)[:, None] + 0.5 * rng.standard_normal((n, d))
        pairs = [(i, j) for i in range(d) for j in range(i + 1, d)][:20]
        truth = X.T @ X
        assert min(abs(truth[i, j]) for i, j in pairs) > 10
        start = time.monotonic()
        total = np.zeros((d, d))
        for seed in range(1000):
            spec = make_sketch(seed=seed, n_input=n, n_buckets=m, n_stacks=4)
            B = sketch_rows(spec, X)
            total += B.T @ B
        elapsed = time.monotonic() - start
        mean = total / 1000
        rel = max(abs(mean[i, j] - truth[i, j]) / abs(truth[i, j])
                  for i, j in pairs)
        assert rel < 0.05
        assert elapsed < 10.0
        passed("sketch-unbiased", f"(worst rel={rel:.4f}, {elapsed:.2f}s)")

    def test_materialized_matrix_matches_streaming(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(100):
            s = int(rng.integers(1, 5))
            m = s * int(rng.integers(1, 13))
            n = int(rng.integers(1, 80))
            d = int(rng.integers(1, 16))
            spec = make_sketch(seed=int(rng.integers(1 << 31)), n_input=n,
                               n_buckets=m, n_stacks=s)
            X = rng.standard_normal((n, d))
            dense = materialize(spec) @ X
            streamed = sketch_rows(spec, X)
            worst = max(worst, float(np.max(np.abs(dense - streamed))))
        assert worst < 1e-12
        passed("sketch-materialize", f"(max diff={worst:.2e})")


class TestLowRankContracts:
    def test_low_rank_gram_recovered(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((200, 8)) @ rng.standard_normal((8, 100))
        spec = make_sketch(seed=3, n_input=200, n_buckets=32, n_stacks=4)
        feats = nystrom_linear_features(X, spec)
        K = X @ X.T
        err = np.linalg.norm(feats.data @ feats.data.T - K) / np.linalg.norm(K)
        assert err < 1e-6
        passed("lowrank-exact-rank8", f"(rel={err:.2e})")

    def test_identity_sketch_is_lossless(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((120, 30))
        feats = nystrom_linear_features(X, identity_sketch(120))
        K = X @ X.T
        err = np.linalg.norm(feats.data @ feats.data.T - K) / np.linalg.norm(K)
        assert err < 1e-10
        passed("lowrank-identity", f"(rel={err:.2e})")


class TestAlignmentContracts:
    def test_solver_optimal_and_feasible(self):
        rng = np.random.default_rng(4)
        worst_gap, worst_kkt = -np.inf, 0.0
        for n_layers in (2, 3):
            for _ in range(50):
                problem = random_problem(rng, n_layers)
                w = solve_nn_quadratic(problem)
                M, a = problem.gram_stats, problem.target_stats
                V = np.abs(rng.standard_normal((10_000, n_layers)))
                V /= np.linalg.norm(V, axis=1, keepdims=True)
                sampled = float(np.max(
                    (V @ a) / np.sqrt(np.einsum("ij,jk,ik->i", V, M, V))))
                oracle = max(grid_best_score(M, a), sampled)
                worst_gap = max(worst_gap, oracle - w.objective)
                v = w.scale * w.mu
                grad = 2.0 * (M @ v - a)
                gscale = max(1.0, float(np.max(np.abs(a))))
                active = v > 0
                kkt = max(
                    float(np.max(np.abs(grad[active]), initial=0.0)),
                    float(np.max(-grad[~active], initial=0.0)),
                ) / gscale
                worst_kkt = max(worst_kkt, kkt)
        assert worst_gap < 1e-6
        assert worst_kkt < 1e-8
        passed("alignment-optimal",
               f"(gap={worst_gap:.2e}, kkt={worst_kkt:.2e})")

    def test_weight_concentrates_on_signal_layer(self, tmp_path):
        # one informative layer among four noise layers: at least 4 of 5
        # seeds must put >0.99 of the weight on it
        from sketchfer import build_gram_stats, load_manifest, read_array
        from sketchfer._util import one_hot

        hits = 0
        for seed in range(5):
            path = synth_features(str(tmp_path / f"s{seed}"), seed=seed,
                                  n_train=400, n_test=10,
                                  layer_dims=(32, 40, 36, 28), n_classes=4,
                                  signal_layers={2: 6.0})
            man = load_manifest(path)
            y = read_array(man.labels_train)
            Y = one_hot(y, 4)
            feats = []
            for pos, layer in enumerate(man.layers):
                X = read_array(layer.train).astype(np.float64)
                spec = make_sketch(seed=1000 + seed * 7 + pos, n_input=400,
                                   n_buckets=64, n_stacks=4)
                feats.append(nystrom_linear_features(X, spec, layer_id=layer.id))
            w = solve_nn_quadratic(build_gram_stats(feats, Y))
            if w.mu[2] > 0.99:
                hits += 1
        assert hits >= 4
        passed("alignment-concentration", f"({hits}/5 seeds)")


class TestKernelContracts:
    def test_full_landmark_kernel_identity(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((150, 10))
        sigma_sq = rbf_sigma_heuristic(X)
        fmap = fit_rbf_nystrom(X, identity_sketch(150), sigma_sq)
        Phi = transform(fmap, X)
        d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
        K = np.exp(-d2 / (2 * sigma_sq))
        G = Phi @ Phi.T
        err = np.linalg.norm(G - K) / np.linalg.norm(K)
        min_eig = float(np.min(np.linalg.eigvalsh((G + G.T) / 2)))
        assert err < 1e-6
        assert np.max(np.diag(G)) <= 1.0 + 1e-6
        assert min_eig >= -1e-8
        passed("rbf-full-landmark", f"(rel={err:.2e}, min eig={min_eig:.1e})")


class TestRegressionContracts:
    def test_primal_dual_agreement(self):
        # 50 overdetermined + 50 underdetermined instances
        rng = np.random.default_rng(6)
        worst = 0.0
        for k in range(100):
            if k < 50:
                n, d = int(rng.integers(10, 40)), int(rng.integers(2, 9))
            else:
                n, d = int(rng.integers(3, 9)), int(rng.integers(10, 35))
            X = rng.standard_normal((n, d))
            Y = rng.standard_normal((n, int(rng.integers(1, 5))))
            alpha = float(rng.uniform(1e-3, 1.0))
            Xq = rng.standard_normal((6, d))
            p = predict(fit_ridge(X, Y, alpha, mode="primal"), Xq).scores
            q = predict(fit_ridge(X, Y, alpha, mode="dual"), Xq).scores
            worst = max(worst, float(np.max(np.abs(p - q))))
        assert worst < 1e-8
        passed("ridge-primal-dual", f"(max diff={worst:.2e})")

    def test_transductive_collapses_to_ridge(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(20):
            n, d = int(rng.integers(5, 40)), int(rng.integers(2, 20))
            X = rng.standard_normal((n, d))
            Y = rng.standard_normal((n, 3))
            alpha = float(rng.uniform(1e-3, 1.0))
            Xq = rng.standard_normal((8, d))
            plain = predict(fit_ridge(X, Y, alpha, mode="primal"), Xq).scores
            collapsed = predict(
                fit_transductive(X, Y, None, beta=1.0 / alpha,
                                 beta_prime=0.0, alpha=alpha), Xq).scores
            worst = max(worst, float(np.max(np.abs(plain - collapsed))))
        assert worst < 1e-10
        passed("transductive-reduction", f"(max diff={worst:.2e})")


class TestCalibrationContracts:
    def test_binned_error_matches_oracle_exactly(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n = int(rng.integers(5, 300))
            c = int(rng.integers(2, 8))
            n_bins = int(rng.integers(1, 30))
            P = scores_to_confidence(3.0 * rng.standard_normal((n, c)), 1.0)
            labels = rng.integers(0, c, size=n)
            assert ece(P, labels, n_bins).ece == ece_oracle(P, labels, n_bins)
        passed("ece-oracle-exact")

    def test_temperature_preserves_labels_and_never_hurts(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            scores = 6.0 * rng.standard_normal((120, 5))
            labels = rng.integers(0, 5, size=120)
            t = fit_temperature(scores, labels)
            P = scores_to_confidence(scores, t)
            np.testing.assert_array_equal(np.argmax(P, axis=1),
                                          np.argmax(scores, axis=1))
            before = ece(scores_to_confidence(scores, 1.0), labels).ece
            assert ece(P, labels).ece <= before
        passed("calibration-safe")


class TestPipelineContracts:
    def test_end_to_end_accuracy(self, endtoend_dataset, tmp_path):
        start = time.monotonic()
        cfg = RunConfig(mode="supervised", portions=(1.0,), n_trials=5,
                        buckets=256, stacks=4, out_dir=str(tmp_path / "full"))
        full = run(cfg, endtoend_dataset)
        single_cfg = RunConfig(mode="ablation-individual", n_trials=5,
                               buckets=256, stacks=4,
                               out_dir=str(tmp_path / "single"))
        single = run(single_cfg, endtoend_dataset)
        elapsed = time.monotonic() - start
        full_acc = {r["trial"]: r["accuracy"]
                    for r in full.payload["series"]["accuracy"]}
        best_single = {}
        for r in single.payload["series"]["individual"]:
            t = r["trial"]
            best_single[t] = max(best_single.get(t, 0.0), r["accuracy"])
        for t in range(5):
            assert full_acc[t] >= 0.90
            assert full_acc[t] >= best_single[t] - 0.02
        assert elapsed < 120.0
        passed("end-to-end",
               f"(acc={min(full_acc.values()):.3f}..{max(full_acc.values()):.3f},"
               f" best single={max(best_single.values()):.3f}, {elapsed:.0f}s)")

    def test_repeated_runs_bitwise_identical(self, endtoend_dataset, tmp_path):
        mk = lambda d: RunConfig(mode="supervised", portions=(0.2,),
                                 n_trials=2, buckets=128, stacks=4,
                                 out_dir=str(tmp_path / d))
        run(mk("r1"), endtoend_dataset)
        run(mk("r2"), endtoend_dataset)
        j1 = json.loads((tmp_path / "r1" / "results.json").read_text())
        j2 = json.loads((tmp_path / "r2" / "results.json").read_text())
        assert j1["payload"] == j2["payload"]
        s1 = np.load(tmp_path / "r1" / "train_scores.npy")
        s2 = np.load(tmp_path / "r2" / "train_scores.npy")
        assert s1.tobytes() == s2.tobytes()
        passed("determinism")
