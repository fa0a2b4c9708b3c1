"""Command-line entry point: ``export`` and ``serve``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .encoders import SUPPORTED_MODELS, load_encoder
from .errors import ExporterError
from .export import ExportJob, run_export
from .server import DEFAULT_MAX_BATCH, serve

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-exporter",
        description="Export transformer sentence embeddings into the "
                    "SEBEMB01 store format, or serve them over HTTP.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("export", help="encode a sentences file into a store")
    p.add_argument("--model", required=True, choices=list(SUPPORTED_MODELS),
                   help="encoder to run")
    p.add_argument("--in", dest="input", required=True,
                   help="sentences.jsonl or a matrix-instances JSONL file")
    p.add_argument("--out", required=True,
                   help="store directory or explicit .bin path")
    p.add_argument("--batch-size", type=int, default=32,
                   help="sentences per encoder call (default 32)")
    p.add_argument("--stub", action="store_true",
                   help="use the deterministic offline stub encoder "
                        "instead of real model weights")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("serve", help="serve the /embed HTTP endpoint")
    p.add_argument("--model", required=True, choices=list(SUPPORTED_MODELS),
                   help="encoder to load")
    p.add_argument("--host", default="127.0.0.1",
                   help="bind address (default 127.0.0.1)")
    p.add_argument("--port", type=int, default=8000,
                   help="bind port (default 8000)")
    p.add_argument("--max-batch", type=int, default=DEFAULT_MAX_BATCH,
                   help=f"largest accepted batch (default {DEFAULT_MAX_BATCH})")
    p.add_argument("--stub", action="store_true",
                   help="serve the deterministic offline stub encoder")
    p.set_defaults(fn=cmd_serve)
    return parser


def cmd_export(args) -> int:
    job = ExportJob(model_name=args.model, sentences_file=args.input,
                    out=args.out, batch_size=args.batch_size)
    encoder = load_encoder(args.model, stub=args.stub)
    result = run_export(job, encoder)
    print(f"wrote {result.count} embeddings (dim {result.dim}) "
          f"to {result.store_path}")
    return 0


def cmd_serve(args) -> int:
    encoder = load_encoder(args.model, stub=args.stub)
    serve(encoder, args.model, host=args.host, port=args.port,
          max_batch=args.max_batch)
    return 0


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        return run(argv)
    except ExporterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:                         # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
