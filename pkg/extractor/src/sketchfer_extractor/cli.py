"""Command-line front end mirroring ExtractionConfig."""

from __future__ import annotations

import argparse
import sys

from .extract import MODELS, WEIGHT_SOURCES, ExtractionConfig, ExtractionError, extract


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sketchfer-extract",
        description="Dump per-block ResNet features of an image dataset "
                    "into a sketchfer manifest.")
    p.add_argument("train_dir", help="image-folder root of the training split")
    p.add_argument("test_dir", help="image-folder root of the test split")
    p.add_argument("out_dir", help="where to write the arrays and manifest")
    p.add_argument("--model", choices=MODELS, default="resnet18")
    p.add_argument("--weights", choices=WEIGHT_SOURCES, default="pretrained")
    p.add_argument("--seed", type=int, default=0,
                   help="initialization seed for --weights random")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--no-penultimate", action="store_true",
                   help="skip the pooled penultimate layer")
    p.add_argument("--include-raw", action="store_true",
                   help="also dump normalized input pixels (raw_input entry)")
    p.add_argument("--resize", type=int, default=256,
                   help="shorter-side resize before cropping")
    p.add_argument("--image-size", type=int, default=224,
                   help="center-crop size fed to the network")
    p.add_argument("--dataset", default="", help="dataset name in the manifest")
    p.add_argument("--device", default="cpu")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = ExtractionConfig(
        train_dir=args.train_dir,
        test_dir=args.test_dir,
        out_dir=args.out_dir,
        model=args.model,
        weights=args.weights,
        seed=args.seed,
        batch_size=args.batch_size,
        include_penultimate=not args.no_penultimate,
        include_raw=args.include_raw,
        resize=args.resize,
        image_size=args.image_size,
        dataset=args.dataset,
        device=args.device,
    )
    try:
        path = extract(config)
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
