"""Rebuild the Filecoin parameter bounds from the bundled source estimates.

    python3 scripts/reproduce_table5.py [--format table|csv|json]
"""

from __future__ import annotations

import argparse
import sys

from ledgerwatt.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--format", default="table", choices=("table", "csv", "json"))
    args = ap.parse_args()
    return cli_main(["calibrate", "--format", args.format])


if __name__ == "__main__":
    sys.exit(main())
