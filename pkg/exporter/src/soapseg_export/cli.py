"""soapseg-export command line."""
from __future__ import annotations

import argparse
import sys

from .export import ExportError, ExportJob, export_contextual, export_sentencevec
from .vecfile import VecFileError


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="soapseg-export",
        description="Export paragraph vectors from a pretrained language "
                    "model into the soapseg embedding-file format.")
    parser.add_argument("--corpus", required=True, help="JSONL notes file")
    parser.add_argument("--model", required=True,
                        help="model identifier or local model directory")
    parser.add_argument("--mode", choices=["sentencevec", "contextual"],
                        required=True)
    parser.add_argument("--out", required=True, help="output embedding file")
    parser.add_argument("--max-tokens", type=int, default=512)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--comment", help="override the metadata comment")
    args = parser.parse_args(argv)

    job = ExportJob(corpus_path=args.corpus, model_id=args.model,
                    output_path=args.out, max_tokens=args.max_tokens,
                    batch_size=args.batch_size, comment=args.comment)
    try:
        runner = export_sentencevec if args.mode == "sentencevec" else export_contextual
        path = runner(job)
    except (ExportError, VecFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
