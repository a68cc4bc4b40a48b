"""Run configuration: every experiment knob in one validated record."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .regression import DEFAULT_ALPHA_GRID, DEFAULT_BETA_GRID

MODES = (
    "supervised",
    "semi",
    "ablation-accumulate",
    "ablation-individual",
    "baseline-randproj",
    "baseline-rbf-bank",
)


def default_portion_sweep(n_points: int = 6) -> tuple[float, ...]:
    """Training-set fractions spaced log-linearly from 2% to 100%."""
    return tuple(float(p) for p in np.logspace(np.log10(0.02), 0.0, n_points))


@dataclass
class RunConfig:
    """Knobs for a pipeline run; see README for the full description."""

    mode: str = "supervised"
    buckets: int = 512            # M, per-layer sketch width
    stacks: int = 4               # s, CountSketches per sketch
    ms_factor: float = 2.0        # landmark count M_s = ms_factor * M
    rbf_stacks: int = 4           # m, stacks in the landmark sketch
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    beta_grid: tuple[float, ...] = DEFAULT_BETA_GRID
    beta_prime_grid: tuple[float, ...] = DEFAULT_BETA_GRID
    portions: tuple[float, ...] = (1.0,)
    labels_per_class: tuple[int, ...] = (2, 5, 10, 20, 50, 100)
    n_trials: int = 5
    seed: int = 0
    skip_rbf: bool = False
    eig_tol: float = 1e-10
    n_bins: int = 15
    temperature_grid: tuple[float, ...] | None = None
    cv_folds: int = 5
    block_rows: int = 4096
    max_pairs: int = 200_000
    parallel_layers: bool = True
    out_dir: str = "run-output"
    cache_dir: str | None = None

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.stacks < 1 or self.buckets < self.stacks or self.buckets % self.stacks:
            raise ValidationError(
                f"buckets={self.buckets} must be a positive multiple of "
                f"stacks={self.stacks}"
            )
        if self.ms_factor <= 0:
            raise ValidationError(f"ms_factor must be positive, got {self.ms_factor}")
        if self.rbf_stacks < 1:
            raise ValidationError(f"rbf_stacks must be >= 1, got {self.rbf_stacks}")
        for p in self.portions:
            if not 0.0 < p <= 1.0:
                raise ValidationError(f"portions must lie in (0, 1], got {p}")
        if len(self.portions) == 0:
            raise ValidationError("portions must be nonempty")
        if any(k < 1 for k in self.labels_per_class):
            raise ValidationError("labels_per_class entries must be >= 1")
        if self.n_trials < 1:
            raise ValidationError(f"n_trials must be >= 1, got {self.n_trials}")
        if not 0.0 < self.eig_tol < 1.0:
            raise ValidationError(f"eig_tol must lie in (0, 1), got {self.eig_tol}")
        if self.cv_folds < 2:
            raise ValidationError(f"cv_folds must be >= 2, got {self.cv_folds}")
        if self.block_rows < 1:
            raise ValidationError(f"block_rows must be >= 1, got {self.block_rows}")
        return self

    @property
    def landmark_buckets(self) -> int:
        """M_s rounded up to the next multiple of the landmark stack count."""
        ms = max(int(round(self.ms_factor * self.buckets)), self.rbf_stacks)
        return ms + (-ms) % self.rbf_stacks

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - fields
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in doc.items():
            if isinstance(value, list):
                value = tuple(value)
            kwargs[key] = value
        return cls(**kwargs).validate()

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        return cls.from_dict(doc)
