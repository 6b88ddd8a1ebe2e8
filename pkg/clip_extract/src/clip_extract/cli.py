"""clip-extract: encode an image-folder benchmark into FCF1 feature files."""

from __future__ import annotations

import argparse
import sys

from .encoders import make_encoder
from .errors import ExtractError
from .extract import BENCHMARKS, extract_benchmark


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clip-extract",
        description="Encode image datasets and class prompts with a pretrained "
                    "CLIP model into FCF1 feature files",
    )
    parser.add_argument("--benchmark", default="auto", choices=sorted(BENCHMARKS))
    parser.add_argument("--root", required=True, help="dataset root (one subfolder per domain)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--encoder", default="clip", choices=["clip", "hash"],
                        help="'hash' is a deterministic stand-in for plumbing tests")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        encoder = make_encoder(args.encoder, device=args.device,
                               batch_size=args.batch_size)
        manifest = extract_benchmark(args.root, args.out, encoder,
                                     benchmark=args.benchmark)
    except ExtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for name, entry in manifest["domains"].items():
        note = f", {len(entry['skipped'])} skipped" if entry["skipped"] else ""
        print(f"wrote {entry['file']} ({entry['n_images']} images{note})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
