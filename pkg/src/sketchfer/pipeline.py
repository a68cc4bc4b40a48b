"""End-to-end orchestration: features -> alignment -> kernel -> regression.

Every run mode follows the same skeleton. Per-layer training rows are
sketched into low-rank linear-kernel features (streamed from disk, with
subset rows staged in a block cache), alignment weights select and scale
the layers, the weighted concatenation optionally passes through a
Nystrom RBF map, and a cross-validated ridge head produces predictions
plus calibration reports. Modes differ only in which feature blocks enter
alignment (sketched layers, hashed-feature baselines, or a bank of RBF
bandwidths over raw inputs) and in the head (plain or transductive ridge).

Results are written as results.json (deterministic payload separated from
timing), one CSV per emitted series, a run.log, and the training-score
matrix used as distillation targets.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._util import derive_seed, one_hot
from .alignment import (
    AlignmentWeights,
    build_gram_stats,
    concat_weighted,
    r_squared_diagnostic,
    solve_nn_quadratic,
)
from .calibration import ece, fit_temperature, scores_to_confidence
from .config import RunConfig
from .errors import ValidationError
from .kernels import (
    RbfFeatureMap,
    fit_rbf_nystrom,
    median_bandwidth,
    rbf_kernel_bank,
    rbf_sigma_heuristic,
    transform,
)
from .lowrank import LowRankFeatures, nystrom_linear_features
from .manifest import Manifest, load_manifest, write_array
from .regression import (
    PredictionScores,
    RidgeModel,
    cross_validate_alpha,
    cross_validate_betas,
    fit_ridge,
    fit_transductive,
    predict,
)
from .sketch import make_sketch, sketch_features

logger = logging.getLogger("sketchfer")

# sub-seed stream ids, one per randomized stage
_S_LAYER, _S_RBF, _S_SUBSET, _S_CV_ALPHA, _S_CV_BETA = 1, 2, 3, 4, 5
_S_RANDPROJ, _S_MEDIAN, _S_BANK, _S_TRIAL = 6, 7, 8, 101


@dataclass
class RunResult:
    """Everything a run emits: deterministic payload, timings, export arrays."""

    mode: str
    payload: dict
    timing: dict
    train_scores: np.ndarray | None = None
    export_meta: dict = field(default_factory=dict)
    out_dir: str | None = None


def trial_seeds(seed: int, n_trials: int) -> list[int]:
    return [derive_seed(seed, _S_TRIAL, t) for t in range(n_trials)]


# ---------------------------------------------------------------------------
# row selection


def _portion_indices(y: np.ndarray, portion: float, seed: int) -> np.ndarray:
    """Stratified subsample of a fraction of rows, in original row order."""
    if portion >= 1.0:
        return np.arange(y.size)
    rng = np.random.default_rng(seed)
    picks = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        picks.append(idx[:max(1, int(round(portion * idx.size)))])
    return np.sort(np.concatenate(picks))


def _labeled_indices(y: np.ndarray, per_class: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded pick of per_class labeled rows per class; rest are unlabeled."""
    rng = np.random.default_rng(seed)
    picks = []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < per_class:
            raise ValidationError(
                f"class {cls} has only {idx.size} samples, need {per_class}"
            )
        rng.shuffle(idx)
        picks.append(idx[:per_class])
    labeled = np.sort(np.concatenate(picks))
    unlabeled = np.setdiff1d(np.arange(y.size), labeled, assume_unique=True)
    return labeled, unlabeled


# ---------------------------------------------------------------------------
# streaming helpers


def _cache_root(config: RunConfig) -> str:
    root = (config.cache_dir or os.environ.get("SKETCHFER_CACHE_DIR")
            or os.path.join(config.out_dir, "cache"))
    os.makedirs(root, exist_ok=True)
    return root


def _stage_subset(src_path: str, idx: np.ndarray, cache_dir: str, name: str,
                  block_rows: int) -> str:
    """Copy selected rows into a float64 cache file for repeated streaming."""
    src = np.load(src_path, mmap_mode="r")
    dst = os.path.join(cache_dir, name)
    out = np.lib.format.open_memmap(dst, mode="w+", dtype=np.float64,
                                    shape=(idx.size, src.shape[1]))
    for start in range(0, idx.size, block_rows):
        sel = idx[start:start + block_rows]
        out[start:start + sel.size] = src[sel]
    out.flush()
    del out
    return dst


def _block_reader(path: str, block_rows: int):
    """Factory of row-block iterators over an on-disk matrix (re-iterable)."""
    def gen():
        arr = np.load(path, mmap_mode="r")
        for start in range(0, arr.shape[0], block_rows):
            yield np.asarray(arr[start:start + block_rows], dtype=np.float64)
    return gen


def _stream_apply(path: str, idx: np.ndarray | None, fn, block_rows: int) -> np.ndarray:
    """Apply a row-wise map to (selected rows of) an on-disk matrix."""
    arr = np.load(path, mmap_mode="r")
    sel = np.arange(arr.shape[0]) if idx is None else idx
    parts = []
    for start in range(0, sel.size, block_rows):
        rows = np.asarray(arr[sel[start:start + block_rows]], dtype=np.float64)
        parts.append(fn(rows))
    if not parts:
        raise ValidationError(f"{path}: no rows selected")
    return parts[0] if len(parts) == 1 else np.vstack(parts)


# ---------------------------------------------------------------------------
# feature blocks (stage 1): per-layer training features + row embedders


@dataclass
class _FeatureBlocks:
    features: list[LowRankFeatures]
    embedders: list           # callables mapping raw rows -> feature rows
    sources: list[tuple[str, str]]  # (train path, test path) per block
    block_ids: list           # reported layer/bandwidth identifiers


def _nystrom_blocks(manifest: Manifest, config: RunConfig, trial_seed: int,
                    idx: np.ndarray, cache_dir: str) -> _FeatureBlocks:
    n_sub = idx.size
    full = idx.size == manifest.n_train

    def fit_one(pos: int) -> tuple[LowRankFeatures, object]:
        layer = manifest.layers[pos]
        spec = make_sketch(derive_seed(trial_seed, _S_LAYER, pos), n_sub,
                           config.buckets, config.stacks)
        if full:
            source = _block_reader(layer.train, config.block_rows)
        else:
            staged = _stage_subset(layer.train, idx, cache_dir,
                                   f"layer{pos}.npy", config.block_rows)
            source = _block_reader(staged, config.block_rows)
        feats = nystrom_linear_features(source, spec, config.eig_tol,
                                        layer_id=layer.id)
        if not full:
            os.unlink(os.path.join(cache_dir, f"layer{pos}.npy"))
        proj = feats.projector
        return feats, (lambda rows, P=proj: rows @ P)

    positions = range(manifest.n_layers)
    if config.parallel_layers and manifest.n_layers > 1:
        with ThreadPoolExecutor(max_workers=min(8, manifest.n_layers)) as pool:
            fitted = list(pool.map(fit_one, positions))
    else:
        fitted = [fit_one(pos) for pos in positions]
    return _FeatureBlocks(
        features=[f for f, _ in fitted],
        embedders=[e for _, e in fitted],
        sources=[(l.train, l.test) for l in manifest.layers],
        block_ids=[l.id for l in manifest.layers],
    )


def _randproj_blocks(manifest: Manifest, config: RunConfig, trial_seed: int,
                     idx: np.ndarray) -> _FeatureBlocks:
    features, embedders = [], []
    for pos, layer in enumerate(manifest.layers):
        spec = make_sketch(derive_seed(trial_seed, _S_RANDPROJ, pos), layer.d,
                           config.buckets, config.stacks)
        embed = (lambda rows, s=spec: sketch_features(s, rows))
        data = _stream_apply(layer.train, idx, embed, config.block_rows)
        features.append(LowRankFeatures(data=data, layer_id=layer.id,
                                        kept_rank=config.buckets,
                                        eig_tol=config.eig_tol,
                                        projector=np.empty((0, 0))))
        embedders.append(embed)
    return _FeatureBlocks(
        features=features, embedders=embedders,
        sources=[(l.train, l.test) for l in manifest.layers],
        block_ids=[l.id for l in manifest.layers],
    )


def _rbf_bank_blocks(manifest: Manifest, config: RunConfig, trial_seed: int,
                     idx: np.ndarray) -> tuple[_FeatureBlocks, float]:
    if manifest.raw_input is None:
        raise ValidationError(
            "baseline-rbf-bank needs a raw_input entry in the manifest"
        )
    raw = manifest.raw_input
    X = _stream_apply(raw.train, idx, lambda rows: rows, config.block_rows)
    gamma = median_bandwidth(X, config.max_pairs,
                             seed=derive_seed(trial_seed, _S_MEDIAN))
    if gamma <= 0:
        raise ValidationError("raw input rows are identical; bandwidth undefined")
    spec = make_sketch(derive_seed(trial_seed, _S_BANK), idx.size,
                       config.landmark_buckets, config.rbf_stacks)
    maps = rbf_kernel_bank(X, gamma, spec, range(-2, 11), config.eig_tol)
    features, embedders, sources, ids = [], [], [], []
    for p, m in zip(range(-2, 11), maps):
        embed = (lambda rows, mp=m: transform(mp, rows))
        features.append(LowRankFeatures(data=embed(X), layer_id=p,
                                        kept_rank=m.kept_rank,
                                        eig_tol=config.eig_tol,
                                        projector=np.empty((0, 0))))
        embedders.append(embed)
        sources.append((raw.train, raw.test))
        ids.append(p)
    return _FeatureBlocks(features=features, embedders=embedders,
                          sources=sources, block_ids=ids), float(gamma)


# ---------------------------------------------------------------------------
# head (stages 3-4): optional RBF map + cross-validated ridge + calibration


@dataclass
class _Head:
    rbf_map: RbfFeatureMap | None
    sigma_sq: float | None
    Z_train: np.ndarray
    alpha: float
    model: RidgeModel
    train_scores: PredictionScores
    temperature: float


def _fit_head(X_phi: np.ndarray, y: np.ndarray, n_classes: int,
              config: RunConfig, trial_seed: int, use_rbf: bool) -> _Head:
    Y = one_hot(y, n_classes)
    if use_rbf:
        sigma_sq = rbf_sigma_heuristic(X_phi)
        spec = make_sketch(derive_seed(trial_seed, _S_RBF), X_phi.shape[0],
                           config.landmark_buckets, config.rbf_stacks)
        rbf_map = fit_rbf_nystrom(X_phi, spec, sigma_sq, config.eig_tol)
        Z = transform(rbf_map, X_phi)
    else:
        sigma_sq, rbf_map, Z = None, None, X_phi
    alpha = cross_validate_alpha(Z, Y, config.cv_folds, config.alpha_grid,
                                 seed=derive_seed(trial_seed, _S_CV_ALPHA))
    model = fit_ridge(Z, Y, alpha)
    train_scores = predict(model, Z)
    temperature = fit_temperature(train_scores, y, config.temperature_grid,
                                  config.n_bins)
    return _Head(rbf_map=rbf_map, sigma_sq=sigma_sq, Z_train=Z, alpha=alpha,
                 model=model, train_scores=train_scores,
                 temperature=temperature)


def _head_transform(head: _Head, X_phi_rows: np.ndarray) -> np.ndarray:
    return transform(head.rbf_map, X_phi_rows) if head.rbf_map is not None else X_phi_rows


# ---------------------------------------------------------------------------
# full stack


@dataclass
class _Stack:
    blocks: _FeatureBlocks
    weights: AlignmentWeights
    X_phi: np.ndarray
    head: _Head
    r_squared: float
    y_train: np.ndarray
    timing: dict
    bank_gamma: float | None = None


def _fit_stack(manifest: Manifest, config: RunConfig, trial_seed: int,
               idx: np.ndarray, y: np.ndarray, cache_dir: str) -> _Stack:
    timing = {}
    t0 = time.perf_counter()
    bank_gamma = None
    if config.mode == "baseline-randproj":
        blocks = _randproj_blocks(manifest, config, trial_seed, idx)
    elif config.mode == "baseline-rbf-bank":
        blocks, bank_gamma = _rbf_bank_blocks(manifest, config, trial_seed, idx)
    else:
        blocks = _nystrom_blocks(manifest, config, trial_seed, idx, cache_dir)
    timing["features"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    Y = one_hot(y, manifest.n_classes)
    weights = solve_nn_quadratic(build_gram_stats(blocks.features, Y))
    X_phi = concat_weighted(blocks.features, weights)
    r2 = r_squared_diagnostic(X_phi, Y)
    timing["alignment"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    # the bank's blocks already are kernel features; no second RBF stage
    use_rbf = not config.skip_rbf and config.mode != "baseline-rbf-bank"
    head = _fit_head(X_phi, y, manifest.n_classes, config, trial_seed, use_rbf)
    timing["head"] = time.perf_counter() - t0
    return _Stack(blocks=blocks, weights=weights, X_phi=X_phi, head=head,
                  r_squared=r2, y_train=y, timing=timing,
                  bank_gamma=bank_gamma)


def _embed_phi(stack: _Stack, config: RunConfig, split: str,
               idx: np.ndarray | None = None,
               only: np.ndarray | None = None) -> np.ndarray:
    """Weighted concatenation of embedded rows for any split/subset."""
    sel = stack.weights.support if only is None else only
    parts = []
    for l in sel:
        train_path, test_path = stack.blocks.sources[l]
        path = train_path if split == "train" else test_path
        emb = _stream_apply(path, idx, stack.blocks.embedders[l],
                            config.block_rows)
        parts.append(np.sqrt(stack.weights.mu[l]) * emb)
    return parts[0] if len(parts) == 1 else np.hstack(parts)


def _accuracy(scores: PredictionScores, y: np.ndarray) -> float:
    return float(np.mean(scores.labels == y))


def _calibration_row(scores: PredictionScores, y: np.ndarray, t: float,
                     n_bins: int) -> dict:
    raw = ece(scores_to_confidence(scores, 1.0), y, n_bins).ece
    cal = ece(scores_to_confidence(scores, t), y, n_bins).ece
    return {"ece_raw": raw, "ece_calibrated": cal}


def _mu_rows(stack: _Stack, base: dict) -> list[dict]:
    rows = []
    for pos, block_id in enumerate(stack.blocks.block_ids):
        rows.append({**base, "layer_id": block_id,
                     "mu": float(stack.weights.mu[pos])})
    return rows


# ---------------------------------------------------------------------------
# run modes


def _dataset_info(manifest: Manifest) -> dict:
    return {
        "name": manifest.dataset,
        "n_train": manifest.n_train,
        "n_test": manifest.n_test,
        "n_classes": manifest.n_classes,
        "n_layers": manifest.n_layers,
        "layer_ids": [l.id for l in manifest.layers],
    }


def _payload_config(config: RunConfig) -> dict:
    doc = config.to_dict()
    doc.pop("out_dir")
    doc.pop("cache_dir")
    return doc


def _summary(rows: list[dict], key: str, value: str) -> list[dict]:
    out = []
    for k in sorted({r[key] for r in rows}):
        vals = np.array([r[value] for r in rows if r[key] == k])
        out.append({key: k, "mean": float(np.mean(vals)),
                    "std": float(np.std(vals))})
    return out


def _run_accuracy_modes(config: RunConfig, manifest: Manifest,
                        cache_dir: str) -> RunResult:
    """Shared driver for supervised and both feature baselines."""
    y_train = np.asarray(np.load(manifest.labels_train))
    y_test = np.asarray(np.load(manifest.labels_test))
    acc_rows, mu_rows, cal_rows = [], [], []
    timing = {}
    export_scores, export_meta = None, {}
    seeds = trial_seeds(config.seed, config.n_trials)
    for portion in config.portions:
        for trial, tseed in enumerate(seeds):
            t0 = time.perf_counter()
            idx = _portion_indices(y_train, portion,
                                   derive_seed(tseed, _S_SUBSET))
            stack = _fit_stack(manifest, config, tseed, idx, y_train[idx],
                               cache_dir)
            X_phi_test = _embed_phi(stack, config, "test")
            test_scores = predict(stack.head.model,
                                  _head_transform(stack.head, X_phi_test))
            acc = _accuracy(test_scores, y_test)
            cal_train = _calibration_row(stack.head.train_scores, stack.y_train,
                                         stack.head.temperature, config.n_bins)
            cal_test = _calibration_row(test_scores, y_test,
                                        stack.head.temperature, config.n_bins)
            row = {
                "portion": float(portion), "trial": trial, "seed": tseed,
                "accuracy": acc, "alpha": stack.head.alpha,
                "sigma_sq": stack.head.sigma_sq,
                "temperature": stack.head.temperature,
                "r_squared": stack.r_squared,
                "support_size": int(stack.weights.support.size),
                "alignment": stack.weights.objective,
                "n_rows": int(idx.size),
            }
            if stack.bank_gamma is not None:
                row["gamma"] = stack.bank_gamma
            acc_rows.append(row)
            mu_rows.extend(_mu_rows(stack, {"portion": float(portion),
                                            "trial": trial}))
            for split, cal in (("train", cal_train), ("test", cal_test)):
                cal_rows.append({"portion": float(portion), "trial": trial,
                                 "split": split,
                                 "temperature": stack.head.temperature, **cal})
            for stage, dt in stack.timing.items():
                timing[stage] = timing.get(stage, 0.0) + dt
            timing["total"] = timing.get("total", 0.0) + time.perf_counter() - t0
            logger.info("portion=%.4f trial=%d accuracy=%.4f alpha=%g",
                        portion, trial, acc, stack.head.alpha)
            if portion == config.portions[-1] and trial == 0:
                export_scores = stack.head.train_scores.scores
                export_meta = {
                    "portion": float(portion), "trial": trial,
                    "alpha": stack.head.alpha,
                    "sigma_sq": stack.head.sigma_sq,
                    "temperature": stack.head.temperature,
                    "mu": [float(v) for v in stack.weights.mu],
                    "layer_ids": list(stack.blocks.block_ids),
                    "row_indices": [int(i) for i in idx],
                }
    payload = {
        "mode": config.mode,
        "config": _payload_config(config),
        "dataset": _dataset_info(manifest),
        "series": {
            "accuracy": acc_rows,
            "accuracy_summary": _summary(acc_rows, "portion", "accuracy"),
            "mu": mu_rows,
            "calibration": cal_rows,
        },
        "export": export_meta,
    }
    return RunResult(mode=config.mode, payload=payload, timing=timing,
                     train_scores=export_scores, export_meta=export_meta)


def run_supervised(config: RunConfig, manifest: Manifest) -> RunResult:
    """Portion sweep of the full four-step method over seeded trials."""
    if config.mode != "supervised":
        raise ValidationError(f"not a supervised mode: {config.mode!r}")
    return _dispatch_with_cache(config, manifest, _run_accuracy_modes)


def run_baselines(config: RunConfig, manifest: Manifest) -> RunResult:
    """Random-projection or multi-bandwidth raw-input baseline."""
    if config.mode not in ("baseline-randproj", "baseline-rbf-bank"):
        raise ValidationError(f"not a baseline mode: {config.mode!r}")
    return _dispatch_with_cache(config, manifest, _run_accuracy_modes)


def _run_semi(config: RunConfig, manifest: Manifest, cache_dir: str) -> RunResult:
    y_train = np.asarray(np.load(manifest.labels_train))
    y_test = np.asarray(np.load(manifest.labels_test))
    rows, mu_rows = [], []
    timing = {}
    export_scores, export_meta = None, {}
    seeds = trial_seeds(config.seed, config.n_trials)
    for per_class in config.labels_per_class:
        for trial, tseed in enumerate(seeds):
            t0 = time.perf_counter()
            labeled, unlabeled = _labeled_indices(
                y_train, per_class, derive_seed(tseed, _S_SUBSET))
            stack = _fit_stack(manifest, config, tseed, labeled,
                               y_train[labeled], cache_dir)
            Y_lab = one_hot(stack.y_train, manifest.n_classes)
            Z_lab = stack.head.Z_train
            Z_unlab = _head_transform(
                stack.head, _embed_phi(stack, config, "train", idx=unlabeled))
            beta, beta_prime = cross_validate_betas(
                Z_lab, Y_lab, Z_unlab, config.cv_folds, config.beta_grid,
                config.beta_prime_grid, stack.head.alpha,
                seed=derive_seed(tseed, _S_CV_BETA))
            semi_model = fit_transductive(Z_lab, Y_lab, Z_unlab, beta,
                                          beta_prime, stack.head.alpha)
            Z_test = _head_transform(stack.head,
                                     _embed_phi(stack, config, "test"))
            sup_acc = _accuracy(predict(stack.head.model, Z_test), y_test)
            semi_scores = predict(semi_model, Z_test)
            semi_acc = _accuracy(semi_scores, y_test)
            rel = (semi_acc - sup_acc) / sup_acc if sup_acc > 0 else None
            rows.append({
                "labels_per_class": int(per_class), "trial": trial,
                "seed": tseed, "supervised_accuracy": sup_acc,
                "semi_accuracy": semi_acc, "relative_improvement": rel,
                "beta": beta, "beta_prime": beta_prime,
                "alpha": stack.head.alpha, "n_labeled": int(labeled.size),
                "n_unlabeled": int(unlabeled.size),
            })
            mu_rows.extend(_mu_rows(stack, {"labels_per_class": int(per_class),
                                            "trial": trial}))
            for stage, dt in stack.timing.items():
                timing[stage] = timing.get(stage, 0.0) + dt
            timing["total"] = timing.get("total", 0.0) + time.perf_counter() - t0
            logger.info(
                "labels_per_class=%d trial=%d supervised=%.4f semi=%.4f "
                "beta=%g beta_prime=%g", per_class, trial, sup_acc, semi_acc,
                beta, beta_prime)
            if per_class == config.labels_per_class[-1] and trial == 0:
                export_scores = stack.head.train_scores.scores
                export_meta = {
                    "labels_per_class": int(per_class), "trial": trial,
                    "alpha": stack.head.alpha,
                    "sigma_sq": stack.head.sigma_sq,
                    "temperature": stack.head.temperature,
                    "mu": [float(v) for v in stack.weights.mu],
                    "layer_ids": list(stack.blocks.block_ids),
                    "row_indices": [int(i) for i in labeled],
                }
    payload = {
        "mode": config.mode,
        "config": _payload_config(config),
        "dataset": _dataset_info(manifest),
        "series": {
            "semi": rows,
            "semi_summary": _summary(rows, "labels_per_class", "semi_accuracy"),
            "mu": mu_rows,
        },
        "export": export_meta,
    }
    return RunResult(mode=config.mode, payload=payload, timing=timing,
                     train_scores=export_scores, export_meta=export_meta)


def run_semi(config: RunConfig, manifest: Manifest) -> RunResult:
    """Transductive runs over the labeled-samples-per-class grid."""
    if config.mode != "semi":
        raise ValidationError(f"not a semi mode: {config.mode!r}")
    return _dispatch_with_cache(config, manifest, _run_semi)


def _run_ablation(config: RunConfig, manifest: Manifest, cache_dir: str) -> RunResult:
    y_train = np.asarray(np.load(manifest.labels_train))
    y_test = np.asarray(np.load(manifest.labels_test))
    accumulate = config.mode == "ablation-accumulate"
    rows, mu_rows = [], []
    timing = {}
    export_scores, export_meta = None, {}
    idx = np.arange(y_train.size)  # layer study uses the full training set
    use_rbf = not config.skip_rbf
    seeds = trial_seeds(config.seed, config.n_trials)
    for trial, tseed in enumerate(seeds):
        t0 = time.perf_counter()
        stack = _fit_stack(manifest, config, tseed, idx, y_train, cache_dir)
        mu_rows.extend(_mu_rows(stack, {"trial": trial}))
        order = stack.weights.support[
            np.argsort(-stack.weights.mu[stack.weights.support], kind="stable")]
        if accumulate:
            for k in range(1, order.size + 1):
                sel = np.sort(order[:k])  # layer order keeps columns aligned
                X_sub = concat_weighted(stack.blocks.features, stack.weights,
                                        only=sel)
                head = _fit_head(X_sub, y_train, manifest.n_classes, config,
                                 tseed, use_rbf)
                Z_test = _head_transform(
                    head, _embed_phi(stack, config, "test", only=sel))
                acc = _accuracy(predict(head.model, Z_test), y_test)
                rows.append({
                    "trial": trial, "seed": tseed, "rank": k,
                    "layer_id": stack.blocks.block_ids[order[k - 1]],
                    "layer_ids": [stack.blocks.block_ids[p] for p in sel],
                    "accuracy": acc, "alpha": head.alpha,
                    "mu_added": float(stack.weights.mu[order[k - 1]]),
                })
                logger.info("trial=%d accumulate rank=%d accuracy=%.4f",
                            trial, k, acc)
        else:
            for pos in order:
                X_sub = stack.blocks.features[pos].data  # single layer, unweighted
                head = _fit_head(X_sub, y_train, manifest.n_classes, config,
                                 tseed, use_rbf)
                emb = _stream_apply(stack.blocks.sources[pos][1], None,
                                    stack.blocks.embedders[pos],
                                    config.block_rows)
                acc = _accuracy(predict(head.model,
                                        _head_transform(head, emb)), y_test)
                rows.append({
                    "trial": trial, "seed": tseed,
                    "layer_id": stack.blocks.block_ids[pos],
                    "accuracy": acc, "alpha": head.alpha,
                    "mu": float(stack.weights.mu[pos]),
                })
                logger.info("trial=%d individual layer=%d accuracy=%.4f",
                            trial, stack.blocks.block_ids[pos], acc)
        for stage, dt in stack.timing.items():
            timing[stage] = timing.get(stage, 0.0) + dt
        timing["total"] = timing.get("total", 0.0) + time.perf_counter() - t0
        if trial == 0:
            export_scores = stack.head.train_scores.scores
            export_meta = {
                "trial": trial, "alpha": stack.head.alpha,
                "sigma_sq": stack.head.sigma_sq,
                "temperature": stack.head.temperature,
                "mu": [float(v) for v in stack.weights.mu],
                "layer_ids": list(stack.blocks.block_ids),
                "row_indices": [int(i) for i in idx],
            }
    series_name = "accumulate" if accumulate else "individual"
    payload = {
        "mode": config.mode,
        "config": _payload_config(config),
        "dataset": _dataset_info(manifest),
        "series": {series_name: rows, "mu": mu_rows},
        "export": export_meta,
    }
    return RunResult(mode=config.mode, payload=payload, timing=timing,
                     train_scores=export_scores, export_meta=export_meta)


def run_ablation(config: RunConfig, manifest: Manifest) -> RunResult:
    """Accuracy of layer prefixes (sorted by weight) or single layers."""
    if config.mode not in ("ablation-accumulate", "ablation-individual"):
        raise ValidationError(f"not an ablation mode: {config.mode!r}")
    return _dispatch_with_cache(config, manifest, _run_ablation)


# ---------------------------------------------------------------------------
# entry point, cache lifecycle, output


def _dispatch_with_cache(config: RunConfig, manifest: Manifest, fn) -> RunResult:
    config.validate()
    cache_dir = tempfile.mkdtemp(prefix="blocks-", dir=_cache_root(config))
    try:
        return fn(config, manifest, cache_dir)
    finally:
        shutil.rmtree(cache_dir, ignore_errors=True)


def run(config: RunConfig, manifest: Manifest | str) -> RunResult:
    """Run the configured mode and write all outputs under config.out_dir."""
    config.validate()
    if isinstance(manifest, str):
        manifest = load_manifest(manifest)
    os.makedirs(config.out_dir, exist_ok=True)
    handler = logging.FileHandler(os.path.join(config.out_dir, "run.log"))
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    try:
        logger.info("mode=%s dataset=%s out_dir=%s", config.mode,
                    manifest.dataset, config.out_dir)
        if config.mode == "supervised":
            result = run_supervised(config, manifest)
        elif config.mode == "semi":
            result = run_semi(config, manifest)
        elif config.mode in ("ablation-accumulate", "ablation-individual"):
            result = run_ablation(config, manifest)
        else:
            result = run_baselines(config, manifest)
        _write_outputs(result, config.out_dir)
        result.out_dir = config.out_dir
        logger.info("done: results written to %s", config.out_dir)
        return result
    finally:
        logger.removeHandler(handler)
        handler.close()


def _write_csv(path: str, rows: list[dict]) -> None:
    if not rows:
        return
    keys = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(row.get(k)) for k in keys})


def _csv_cell(value):
    if isinstance(value, list):
        return " ".join(str(v) for v in value)
    return "" if value is None else value


def _write_outputs(result: RunResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    doc = {"payload": result.payload, "timing": result.timing}
    with open(os.path.join(out_dir, "results.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    for name, rows in result.payload["series"].items():
        _write_csv(os.path.join(out_dir, f"{name}.csv"), rows)
    if result.train_scores is not None:
        export_predictions(result, os.path.join(out_dir, "train_scores.npy"))


def export_predictions(result: RunResult, path: str) -> str:
    """Write the training-score matrix (distillation targets) plus metadata."""
    if result.train_scores is None:
        raise ValidationError("run produced no training scores to export")
    write_array(path, result.train_scores)
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump({"shape": list(result.train_scores.shape),
                   **result.export_meta}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def export_from_dir(run_dir: str, dest: str) -> str:
    """Re-export the stored training scores of a completed run."""
    src = os.path.join(run_dir, "train_scores.npy")
    if not os.path.exists(src):
        raise ValidationError(f"no exported scores found under {run_dir}")
    scores = np.load(src, allow_pickle=False)
    meta_path = src + ".json"
    meta = {}
    if os.path.exists(meta_path):
        with open(meta_path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    meta.pop("shape", None)
    result = RunResult(mode="export", payload={}, timing={},
                       train_scores=scores, export_meta=meta)
    return export_predictions(result, dest)
