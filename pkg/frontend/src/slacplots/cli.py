"""Command-line entry point: ``plot --csv PATH --kind KIND --out PATH``.

Exit codes mirror the benchmark CLI: 0 success, 2 for request/schema
errors, 3 for I/O errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from slacplots.render import KIND_COLUMNS, FigureRequest, SchemaMismatch, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render a benchmark CSV into a figure.")
    parser.add_argument("--csv", required=True, help="input CSV path")
    parser.add_argument("--kind", required=True, choices=sorted(KIND_COLUMNS),
                        help="figure kind")
    parser.add_argument("--out", required=True,
                        help="output image path (.svg default, .png supported)")
    args = parser.parse_args(argv)

    csv_path = Path(args.csv)
    if not csv_path.is_file():
        print(f"error: cannot read CSV file: {csv_path}", file=sys.stderr)
        return 3
    request = FigureRequest(csv_path=csv_path, kind=args.kind,
                            out_path=Path(args.out))
    try:
        render(request)
    except (SchemaMismatch, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
