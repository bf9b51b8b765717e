#!/usr/bin/env python3
"""Compare routing overhead and delivery ratio of both protocols across
network sizes, reproducing the scaling experiment."""

import argparse
import sys

from qkdsim.experiment import run_sweep
from qkdsim.stats import write_csv

SPEC = """
protocol=gpsrq,dv
nodes=10,20,30,40,50
seeds=6,11,17,23
duration={duration}
gabriel=on
"""


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--duration", type=float, default=60.0)
    parser.add_argument("--out", default="protocol_comparison.csv")
    args = parser.parse_args()
    rows, meta = run_sweep(SPEC.format(duration=args.duration))
    meta["script"] = "run_protocol_comparison"
    with open(args.out, "w", encoding="ascii") as fh:
        write_csv(fh, rows, metadata=meta)
    print(f"wrote {args.out} ({len(rows)} runs)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
