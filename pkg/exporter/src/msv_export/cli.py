"""Command line for the exporter: ``msv-export <identifier> --out DIR``."""

from __future__ import annotations

import argparse
import sys

from .exporter import ExportError, export_model

EXIT_OK = 0
EXIT_EXPORT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msv-export", description=__doc__)
    parser.add_argument("identifier", help="torchvision model name, e.g. resnet18")
    parser.add_argument("--out", default="exported", help="output directory")
    parser.add_argument(
        "--weights",
        choices=("pretrained", "random"),
        default="pretrained",
        help="pretrained weights (needs network/cache) or seeded random initialization",
    )
    parser.add_argument("--seed", type=int, default=0, help="init seed for --weights random")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = export_model(
            args.identifier, args.out, weights=args.weights, init_seed=args.seed
        )
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXPORT
    print(
        f"exported {manifest.source} -> {manifest.model_path}\n"
        f"  classes: {manifest.n_classes}  input: {manifest.input_size}  "
        f"sha256: {manifest.sha256[:16]}...\n"
        f"  round trip: top class {manifest.round_trip.exported_top_class}, "
        f"max prob diff {manifest.round_trip.max_prob_diff:.2e}"
    )
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
