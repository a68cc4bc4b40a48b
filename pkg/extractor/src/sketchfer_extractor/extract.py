"""Per-block ResNet feature extraction into pipeline manifests.

Runs a frozen ResNet-18/34 over an image-folder dataset and writes one
float32 NPY matrix per hooked layer (rows are images, spatial dimensions
flattened row-major), integer label vectors, and a manifest JSON indexing
it all. Hook targets are every residual block output, the three
stage-transition downsample projections, and optionally the penultimate
pooled layer, in network order; with the penultimate included that is 12
matrices per split for resnet18 and 20 for resnet34.

Extraction is forward-only (eval mode, no gradients) and deterministic:
identical configs produce bitwise-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np
import torch
from torchvision import datasets, models, transforms

MODELS = ("resnet18", "resnet34")
WEIGHT_SOURCES = ("pretrained", "random")
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class ExtractionError(Exception):
    """Bad configuration, unreadable dataset, or a failed forward pass."""


@dataclass
class ExtractionConfig:
    """Everything one extraction run depends on."""

    train_dir: str
    test_dir: str
    out_dir: str
    model: str = "resnet18"
    weights: str = "pretrained"   # "random" draws a seeded initialization
    seed: int = 0
    batch_size: int = 32
    include_penultimate: bool = True
    include_raw: bool = False     # also dump normalized input pixels
    resize: int = 256             # shorter side, before the center crop
    image_size: int = 224
    mean: tuple[float, float, float] = IMAGENET_MEAN
    std: tuple[float, float, float] = IMAGENET_STD
    dataset: str = ""             # manifest name; defaults to the train dir
    device: str = "cpu"

    def validate(self) -> "ExtractionConfig":
        if self.model not in MODELS:
            raise ExtractionError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.weights not in WEIGHT_SOURCES:
            raise ExtractionError(
                f"weights must be one of {WEIGHT_SOURCES}, got {self.weights!r}"
            )
        if self.batch_size < 1:
            raise ExtractionError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.image_size < 32:
            raise ExtractionError(f"image_size must be >= 32, got {self.image_size}")
        if self.resize < self.image_size:
            raise ExtractionError(
                f"resize ({self.resize}) must be >= image_size ({self.image_size})"
            )
        for d, what in ((self.train_dir, "train_dir"), (self.test_dir, "test_dir")):
            if not os.path.isdir(d):
                raise ExtractionError(f"{what} is not a directory: {d}")
        return self


def write_array(path: str, arr: np.ndarray) -> None:
    """Write an NPY file atomically (temp file + rename)."""
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


def build_model(config: ExtractionConfig) -> torch.nn.Module:
    """Frozen ResNet in eval mode; random weights are seeded."""
    ctor = models.resnet18 if config.model == "resnet18" else models.resnet34
    if config.weights == "random":
        torch.manual_seed(config.seed)
        net = ctor(weights=None)
    else:
        enum = (models.ResNet18_Weights if config.model == "resnet18"
                else models.ResNet34_Weights)
        try:
            net = ctor(weights=enum.IMAGENET1K_V1)
        except Exception as exc:
            raise ExtractionError(
                f"could not load pretrained {config.model} weights ({exc}); "
                "if the model zoo is unreachable, pass weights='random' or "
                "pre-populate the torch hub cache"
            ) from None
    net.eval()
    for p in net.parameters():
        p.requires_grad_(False)
    return net


def hook_targets(net: torch.nn.Module,
                 include_penultimate: bool) -> list[tuple[str, torch.nn.Module]]:
    """(name, module) pairs to capture, in network order.

    Every residual block output plus each stage's downsample projection;
    the downsample precedes its block since the block output consumes it.
    """
    targets: list[tuple[str, torch.nn.Module]] = []
    for stage_name in ("layer1", "layer2", "layer3", "layer4"):
        stage = getattr(net, stage_name)
        for i, block in enumerate(stage):
            if block.downsample is not None:
                targets.append((f"{stage_name}.{i}.downsample", block.downsample))
            targets.append((f"{stage_name}.{i}", block))
    if include_penultimate:
        targets.append(("avgpool", net.avgpool))
    return targets


def _preprocess(config: ExtractionConfig) -> transforms.Compose:
    return transforms.Compose([
        transforms.Resize(config.resize),
        transforms.CenterCrop(config.image_size),
        transforms.ToTensor(),
        transforms.Normalize(mean=config.mean, std=config.std),
    ])


def _load_split(root: str, config: ExtractionConfig) -> datasets.ImageFolder:
    try:
        return datasets.ImageFolder(root, transform=_preprocess(config))
    except FileNotFoundError as exc:
        raise ExtractionError(f"{root}: {exc}") from None


@dataclass
class _Capture:
    """Forward-hook sink mapping each target module to its last output."""

    outputs: dict[int, torch.Tensor] = field(default_factory=dict)

    def attach(self, targets: list[tuple[str, torch.nn.Module]]) -> list:
        handles = []
        for _, module in targets:
            handles.append(module.register_forward_hook(
                lambda m, args, out: self.outputs.__setitem__(id(m), out)))
        return handles


def _extract_split(net: torch.nn.Module, data: datasets.ImageFolder,
                   targets: list[tuple[str, torch.nn.Module]],
                   config: ExtractionConfig) -> tuple[list[np.ndarray], np.ndarray]:
    """Batched forward passes; returns per-target matrices and labels."""
    capture = _Capture()
    handles = capture.attach(targets)
    device = torch.device(config.device)
    chunks: list[list[np.ndarray]] = [[] for _ in targets]
    raw_chunks: list[np.ndarray] = []
    labels: list[int] = []
    try:
        with torch.no_grad():
            batch: list[torch.Tensor] = []
            for i in range(len(data)):
                img, label = data[i]
                batch.append(img)
                labels.append(int(label))
                if len(batch) == config.batch_size or i == len(data) - 1:
                    stacked = torch.stack(batch).to(device)
                    try:
                        net(stacked)
                    except RuntimeError as exc:
                        if "memory" in str(exc).lower():
                            raise ExtractionError(
                                f"forward pass ran out of memory at batch size "
                                f"{config.batch_size}; reduce batch_size"
                            ) from None
                        raise
                    for pos, (_, module) in enumerate(targets):
                        out = capture.outputs[id(module)]
                        chunks[pos].append(
                            out.flatten(start_dim=1).cpu().numpy()
                            .astype(np.float32))
                    if config.include_raw:
                        raw_chunks.append(
                            stacked.flatten(start_dim=1).cpu().numpy()
                            .astype(np.float32))
                    batch = []
    finally:
        for h in handles:
            h.remove()
    mats = [np.concatenate(c, axis=0) for c in chunks]
    if config.include_raw:
        mats.append(np.concatenate(raw_chunks, axis=0))
    return mats, np.asarray(labels, dtype=np.int64)


def extract(config: ExtractionConfig) -> str:
    """Run the extraction; returns the written manifest path."""
    config = config.validate()
    net = build_model(config).to(torch.device(config.device))
    targets = hook_targets(net, config.include_penultimate)
    train = _load_split(config.train_dir, config)
    test = _load_split(config.test_dir, config)
    if train.classes != test.classes:
        raise ExtractionError(
            f"train and test class folders differ: {train.classes} "
            f"vs {test.classes}"
        )
    if len(train.classes) < 2:
        raise ExtractionError("need at least 2 class folders")

    os.makedirs(config.out_dir, exist_ok=True)
    train_mats, y_train = _extract_split(net, train, targets, config)
    test_mats, y_test = _extract_split(net, test, targets, config)

    layers = []
    for pos, (name, _) in enumerate(targets):
        d = int(train_mats[pos].shape[1])
        train_file = f"layer{pos:02d}_train.npy"
        test_file = f"layer{pos:02d}_test.npy"
        write_array(os.path.join(config.out_dir, train_file), train_mats[pos])
        write_array(os.path.join(config.out_dir, test_file), test_mats[pos])
        layers.append({"id": pos, "d": d, "train": train_file,
                       "test": test_file, "name": name})
    write_array(os.path.join(config.out_dir, "labels_train.npy"), y_train)
    write_array(os.path.join(config.out_dir, "labels_test.npy"), y_test)

    raw_entry = None
    if config.include_raw:
        raw_train, raw_test = train_mats[len(targets)], test_mats[len(targets)]
        write_array(os.path.join(config.out_dir, "raw_train.npy"), raw_train)
        write_array(os.path.join(config.out_dir, "raw_test.npy"), raw_test)
        raw_entry = {"d": int(raw_train.shape[1]), "train": "raw_train.npy",
                     "test": "raw_test.npy"}

    manifest = {
        "dataset": config.dataset or os.path.basename(
            os.path.normpath(config.train_dir)),
        "n_train": int(y_train.size),
        "n_test": int(y_test.size),
        "n_classes": len(train.classes),
        "dtype": "float32",
        "layers": layers,
        "labels": {"train": "labels_train.npy", "test": "labels_test.npy"},
        "raw_input": raw_entry,
        "producer": {
            "tool": "sketchfer-extractor",
            "config": {k: list(v) if isinstance(v, tuple) else v
                       for k, v in dataclasses.asdict(config).items()},
            "classes": train.classes,
            "layer_names": [name for name, _ in targets],
        },
    }
    path = os.path.join(config.out_dir, "manifest.json")
    fd, tmp = tempfile.mkstemp(dir=config.out_dir, suffix=".json.tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path
