"""Emit the neighbor-distance histogram CSV for an index snapshot.

Usage:
    python scripts/neighbor_histogram.py --index artifacts/index.json \
        --out hist.csv [--k 3] [--bin-width 0.02]

For each indexed SQL this computes the mean normalized tree-edit distance to
its k nearest neighbors from other schemas and bins the values; the CSV plots
directly as a frequency distribution.
"""

import argparse
import sys
import time
from pathlib import Path

from sqlsynth.retrieval import load_index, neighbor_stats


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--index", required=True, type=Path)
    parser.add_argument("--out", required=True, type=Path)
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--bin-width", type=float, default=0.02)
    args = parser.parse_args()

    index = load_index(args.index)
    print(f"index: {len(index)} entries")
    t0 = time.time()
    stats = neighbor_stats(index, k=args.k, bin_width=args.bin_width)
    print(f"fraction with >={args.k} zero-distance cross-schema neighbors: "
          f"{stats.zero_neighbor_fraction:.4f}  ({time.time() - t0:.0f}s)")
    args.out.write_text(stats.to_csv(), encoding="utf-8")
    print(f"histogram -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
