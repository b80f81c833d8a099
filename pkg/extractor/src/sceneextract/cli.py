"""CLI mirroring the mapping engine's conventions: extract and caption."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .backends import ExtractorConfig
from .caption import caption_crops
from .extract import extract_sequence


def _config_from_args(args) -> ExtractorConfig:
    return ExtractorConfig(
        backend=args.backend,
        mask_model=args.mask_model,
        feature_model=args.feature_model,
        caption_model=args.caption_model,
        device=args.device,
        stride=args.stride,
        dim=args.dim,
    )


def _add_model_args(p):
    p.add_argument("--backend", choices=["synthetic", "huggingface"], default="synthetic")
    p.add_argument("--mask-model", default="", help="mask-proposal checkpoint path")
    p.add_argument("--feature-model", default="", help="dense-feature checkpoint path")
    p.add_argument("--caption-model", default="", help="captioning checkpoint path")
    p.add_argument("--device", default="cpu")
    p.add_argument("--stride", type=int, default=8, help="feature grid stride")
    p.add_argument("--dim", type=int, default=64, help="descriptor dimension")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sceneextract",
        description="Foundation-model extraction emitting scenegrounder archives",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="RGB sequence -> detection archive")
    p.add_argument("--sequence", required=True, help="sequence JSON with rgb_path entries")
    p.add_argument("--output", required=True, help="archive directory to write")
    _add_model_args(p)
    p.set_defaults(func=lambda a: print(json.dumps(
        extract_sequence(a.sequence, a.output, _config_from_args(a)), indent=2)))

    p = sub.add_parser("caption", help="best-view crops -> caption fixture JSON")
    p.add_argument("--crops", required=True, help="directory of crop_<id>.png files")
    p.add_argument("--output", required=True, help="caption JSON to write")
    _add_model_args(p)
    p.set_defaults(func=lambda a: print(json.dumps(
        caption_crops(a.crops, a.output, _config_from_args(a)), indent=2)))

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        args.func(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
