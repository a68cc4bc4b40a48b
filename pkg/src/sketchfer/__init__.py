"""Finetuning-free transfer learning on frozen per-layer features.

Pipeline: stacked-CountSketch low-rank approximation of each layer's linear
kernel, kernel-target alignment to select and weight layers, optional
Nystrom RBF feature map, and closed-form (or transductive) ridge regression,
with calibration diagnostics.
"""

from .alignment import (
    AlignmentProblem,
    AlignmentWeights,
    alignment_score,
    build_gram_stats,
    concat_weighted,
    r_squared_diagnostic,
    solve_nn_quadratic,
)
from .calibration import CalibrationReport, ece, fit_temperature, scores_to_confidence
from .config import MODES, RunConfig, default_portion_sweep
from .errors import (
    DegenerateInputError,
    DimensionError,
    ManifestError,
    SketchferError,
    ValidationError,
)
from .kernels import (
    RbfFeatureMap,
    fit_rbf_nystrom,
    median_bandwidth,
    rbf_kernel_bank,
    rbf_sigma_heuristic,
    transform,
)
from .lowrank import LowRankFeatures, nystrom_linear_features, pinv_half
from .manifest import Manifest, load_manifest, read_array, write_array
from .pipeline import (
    RunResult,
    export_predictions,
    run,
    run_ablation,
    run_baselines,
    run_semi,
    run_supervised,
    trial_seeds,
)
from .regression import (
    PredictionScores,
    RidgeModel,
    cross_validate_alpha,
    cross_validate_betas,
    fit_ridge,
    fit_transductive,
    load_model,
    predict,
    pseudo_label,
    save_model,
)
from .sketch import (
    SketchSpec,
    identity_sketch,
    make_sketch,
    materialize,
    sketch_features,
    sketch_rows,
)
from .synth import synth_features

__version__ = "0.1.0"

__all__ = [
    "AlignmentProblem",
    "AlignmentWeights",
    "CalibrationReport",
    "DegenerateInputError",
    "DimensionError",
    "LowRankFeatures",
    "MODES",
    "Manifest",
    "ManifestError",
    "PredictionScores",
    "RbfFeatureMap",
    "RidgeModel",
    "RunConfig",
    "RunResult",
    "SketchSpec",
    "SketchferError",
    "ValidationError",
    "alignment_score",
    "build_gram_stats",
    "concat_weighted",
    "cross_validate_alpha",
    "cross_validate_betas",
    "default_portion_sweep",
    "ece",
    "export_predictions",
    "fit_ridge",
    "fit_rbf_nystrom",
    "fit_temperature",
    "fit_transductive",
    "identity_sketch",
    "load_manifest",
    "load_model",
    "make_sketch",
    "materialize",
    "median_bandwidth",
    "nystrom_linear_features",
    "pinv_half",
    "predict",
    "pseudo_label",
    "r_squared_diagnostic",
    "rbf_kernel_bank",
    "rbf_sigma_heuristic",
    "read_array",
    "run",
    "run_ablation",
    "run_baselines",
    "run_semi",
    "run_supervised",
    "save_model",
    "scores_to_confidence",
    "sketch_features",
    "sketch_rows",
    "solve_nn_quadratic",
    "synth_features",
    "transform",
    "trial_seeds",
    "write_array",
]
