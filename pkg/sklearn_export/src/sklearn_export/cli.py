"""`export-tree` command line entry point."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import ConversionError, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="export-tree",
        description="convert a fitted scikit-learn decision tree to tree JSON",
    )
    parser.add_argument("model", help="joblib/pickle file with the fitted classifier")
    parser.add_argument(
        "--features",
        default=None,
        help="comma-separated feature names, in model column order",
    )
    parser.add_argument("--out", required=True, help="output JSON path")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    names = None
    if args.features is not None:
        names = [part.strip() for part in args.features.split(",") if part.strip()]
    try:
        document = export(args.model, names, args.out)
    except ConversionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({_count_splits(document['root'])} splits)")
    return 0


def _count_splits(node: dict) -> int:
    if "leaf" in node:
        return 0
    return 1 + _count_splits(node["left"]) + _count_splits(node["right"])


if __name__ == "__main__":
    sys.exit(main())
