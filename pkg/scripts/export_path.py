"""
Export one seeded Wiener path (optionally refined) to CSV: columns t,W1..Wm.

    python export_path.py --seed 7 --m 1 --steps 200 --h 0.1 --levels 2 --out path.csv
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from src.application.noise import generate_path, path_rows, refine_to
from src.domain.errors import ConfigError
from src.infrastructure.file_storage import FileRunStorage

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(message)s")
log = logging.getLogger(__name__)

OUTPUT_FILE = "wiener_path.csv"


def dump(seed: int, m: int, N: int, h: float, levels: int, output: Path) -> Path:
    path = refine_to(generate_path(seed, m, N, h), levels)
    header, rows = path_rows(path)

    log.info("Writing %d rows to %s …", len(rows), output)
    storage = FileRunStorage(output.parent)
    storage.write_csv(output.name, header, rows)
    log.info("Export complete: %s (%d rows, sha256=%s)", output, len(rows), storage.written()[output.name])
    return output


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Export a seeded Wiener path to CSV")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--m", type=int, default=1, help="number of independent processes")
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--h", type=float, default=0.1)
    parser.add_argument("--levels", type=int, default=0, help="Brownian-bridge refinements")
    parser.add_argument("--out", default=OUTPUT_FILE)
    args = parser.parse_args()

    try:
        dump(args.seed, args.m, args.steps, args.h, args.levels, Path(args.out))
    except ConfigError as exc:
        log.error("%s", exc)
        sys.exit(2)
