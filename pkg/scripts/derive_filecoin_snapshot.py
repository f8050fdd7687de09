"""Recover the 2023-08-31 Filecoin snapshot from published lower/average power.

The bundled snapshot file is produced by this script. It solves the two
model rows (lower and average tier) for sealing rate and raw capacity, then
prints the upper tier as a cross-check against the published 257.917 MW.

    python3 scripts/derive_filecoin_snapshot.py [--write]
"""

from __future__ import annotations

import argparse
import json
from datetime import datetime, timezone

from ledgerwatt.config import DATA_DIR
from ledgerwatt.filecoin import load_preset, power_bounds, recover_snapshot

LOWER_W = 9.39e6
ESTIMATE_W = 79.086e6
UPPER_PUBLISHED_W = 257.917e6
TARGET = DATA_DIR / "filecoin_snapshot_2023-08-31.json"


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--write", action="store_true", help="overwrite the bundled snapshot file")
    args = ap.parse_args()

    params = load_preset("table5-2023")
    snap = recover_snapshot(params, LOWER_W, ESTIMATE_W, datetime(2023, 8, 31, tzinfo=timezone.utc))
    upper = power_bounds(params, snap).upper
    print(f"sealing rate  {float(snap.sealing_rate)!r} B/h")
    print(f"raw capacity  {float(snap.raw_capacity)!r} B")
    print(f"upper tier    {upper / 1e6:.3f} MW (published {UPPER_PUBLISHED_W / 1e6:.3f} MW, "
          f"{(upper - UPPER_PUBLISHED_W) / UPPER_PUBLISHED_W:+.3%})")

    if args.write:
        doc = json.loads(TARGET.read_text(encoding="utf-8"))
        doc["records"] = [{
            "date": "2023-08-31",
            "sealing_rate_bytes_per_hour": snap.sealing_rate,
            "raw_capacity_bytes": snap.raw_capacity,
        }]
        TARGET.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {TARGET}")


if __name__ == "__main__":
    main()
