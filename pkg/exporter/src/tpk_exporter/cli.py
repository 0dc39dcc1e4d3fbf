"""CLI: dump one image/prompt pair to TPK files the pruning engine can read."""

from __future__ import annotations

import argparse
import json
import sys

from .export import ExportError, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tpk-export",
        description="Export visual and textual token embeddings from a LLaVA-class model.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--model", required=True, help="model id or local checkpoint path")
    parser.add_argument("--image", required=True, help="input image path")
    parser.add_argument("--prompt", default="", help="instruction prompt text")
    parser.add_argument("--out", required=True, help="output directory")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses exit code 2 for usage errors; 2 is reserved for
        # data/model errors here, so fold those into 1
        return 0 if exc.code == 0 else 1

    try:
        manifest = export(args.model, args.image, args.prompt, args.out)
    except ExportError as exc:
        print(f"tpk-export: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    json.dump(manifest.to_json_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
