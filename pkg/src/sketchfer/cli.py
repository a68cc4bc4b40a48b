"""Command-line entry points.

Subcommands map one-to-one onto the run modes (plus a synthetic-data
generator for quick experiments). Exit codes: 0 on success, 2 when inputs
fail validation, 1 on any other error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import RunConfig, default_portion_sweep
from .errors import SketchferError, ValidationError
from .pipeline import export_from_dir, run
from .synth import synth_features


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("manifest", help="path to a feature manifest JSON")
    parser.add_argument("--config", help="JSON run-config file (flags override it)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--buckets", type=int, default=None,
                        help="sketch width per layer")
    parser.add_argument("--stacks", type=int, default=None,
                        help="independent hash stacks per sketch")
    parser.add_argument("--ms-factor", type=float, default=None,
                        help="RBF landmark count as a multiple of --buckets")
    parser.add_argument("--portion", type=float, action="append", default=None,
                        help="training fraction; repeat for a sweep")
    parser.add_argument("--trials", type=int, default=None,
                        help="seeded repeats per sweep point")
    parser.add_argument("--cv-folds", type=int, default=None)
    parser.add_argument("--skip-rbf", action="store_true",
                        help="stop after the linear sketched features")
    parser.add_argument("--no-parallel", action="store_true",
                        help="fit layers sequentially")
    parser.add_argument("--cache-dir", default=None,
                        help="block cache location (or SKETCHFER_CACHE_DIR)")
    parser.add_argument("--out-dir", default=None)


def _build_config(args: argparse.Namespace, mode: str) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    updates = {"mode": mode}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.buckets is not None:
        updates["buckets"] = args.buckets
    if args.stacks is not None:
        updates["stacks"] = args.stacks
    if args.ms_factor is not None:
        updates["ms_factor"] = args.ms_factor
    if args.portion:
        updates["portions"] = tuple(args.portion)
    elif mode == "supervised" and not args.config:
        updates["portions"] = tuple(float(p) for p in default_portion_sweep())
    if args.trials is not None:
        updates["n_trials"] = args.trials
    if args.cv_folds is not None:
        updates["cv_folds"] = args.cv_folds
    if args.skip_rbf:
        updates["skip_rbf"] = True
    if args.no_parallel:
        updates["parallel_layers"] = False
    if args.cache_dir is not None:
        updates["cache_dir"] = args.cache_dir
    if args.out_dir is not None:
        updates["out_dir"] = args.out_dir
    if getattr(args, "labels_per_class", None):
        updates["labels_per_class"] = tuple(args.labels_per_class)
    cfg = dataclasses.replace(cfg, **updates)
    cfg.validate()
    return cfg


def _cmd_run(args: argparse.Namespace) -> int:
    return _execute(_build_config(args, "supervised"), args.manifest)


def _cmd_ablate(args: argparse.Namespace) -> int:
    mode = "ablation-individual" if args.individual else "ablation-accumulate"
    return _execute(_build_config(args, mode), args.manifest)


def _cmd_semi(args: argparse.Namespace) -> int:
    return _execute(_build_config(args, "semi"), args.manifest)


def _cmd_baseline(args: argparse.Namespace) -> int:
    mode = {"randproj": "baseline-randproj", "rbf-bank": "baseline-rbf-bank"}
    return _execute(_build_config(args, mode[args.kind]), args.manifest)


def _execute(config: RunConfig, manifest_path: str) -> int:
    result = run(config, manifest_path)
    print(f"{result.mode}: results written to {config.out_dir}")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    path = export_from_dir(args.run_dir, args.dest)
    print(f"exported training scores to {path}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    path = synth_features(
        args.out_dir, seed=args.seed, n_train=args.n_train,
        n_test=args.n_test, layer_dims=tuple(args.dims),
        n_classes=args.classes)
    print(f"wrote manifest {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sketchfer",
        description="Sketched multi-layer kernel transfer without finetuning.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="supervised portion sweep")
    _add_common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("ablate", help="layer-subset study")
    _add_common(p)
    p.add_argument("--individual", action="store_true",
                   help="score each layer alone instead of weight-ordered prefixes")
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("semi", help="transductive runs over labeled-set sizes")
    _add_common(p)
    p.add_argument("--labels-per-class", type=int, action="append",
                   default=None, help="labeled samples per class; repeatable")
    p.set_defaults(func=_cmd_semi)

    p = sub.add_parser("baseline", help="reference feature pipelines")
    p.add_argument("kind", choices=("randproj", "rbf-bank"))
    _add_common(p)
    p.set_defaults(func=_cmd_baseline)

    p = sub.add_parser("export", help="re-export stored training scores")
    p.add_argument("run_dir", help="directory of a completed run")
    p.add_argument("dest", help="destination .npy path")
    p.set_defaults(func=_cmd_export)

    p = sub.add_parser("synth", help="generate a synthetic layered dataset")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=500)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--dims", type=int, nargs="+", default=[48, 64, 96, 80])
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SketchferError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
