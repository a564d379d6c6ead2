"""blapose-ingest command line.

Usage: blapose-ingest <kind> --manifest m.json [--force] [--json]

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .convert import convert
from .errors import IngestError, SchemaError
from .manifest import KINDS, IngestManifest


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> CliParser:
    parser = CliParser(prog="blapose-ingest", description=__doc__)
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--force", action="store_true",
                        help="allow overwriting existing outputs")
    parser.add_argument("--json", action="store_true",
                        help="print the conversion log as JSON on stdout")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        manifest = IngestManifest.load(args.manifest)
        if manifest.kind != args.kind:
            raise SchemaError(
                f"manifest kind {manifest.kind!r} does not match command {args.kind!r}"
            )
        log = convert(manifest, force=args.force)
        if args.json:
            print(json.dumps(log, sort_keys=True))
        return 0
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
