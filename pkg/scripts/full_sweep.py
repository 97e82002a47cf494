"""Minimum time over the full coupling range 11/122 <= G0 <= 1/2 at 0.001 spacing.

Runs the sequential warm-started sweep on 70 nodes and writes the table as
CSV. Expect several hours on one core.
"""

import argparse
import logging
import sys
from pathlib import Path

from omcool import mintime

G0_MAX = 0.5
G0_MIN = 11 / 122


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--force", action="store_true", help="overwrite an existing file")
    parser.add_argument("--g0-max", type=float, default=G0_MAX)
    parser.add_argument("--g0-min", type=float, default=G0_MIN)
    parser.add_argument("--nodes", type=int, default=mintime.SWEEP_NODES)
    parser.add_argument("--step", type=float, default=0.001)
    parser.add_argument("--mode", choices=mintime.MODES, default="paper")
    args = parser.parse_args(argv)
    if args.out.exists() and not args.force:
        print(f"{args.out} exists; pass --force to overwrite", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", stream=sys.stderr)
    values = mintime._sweep_values(args.g0_max, args.g0_min, args.step)
    if values[-1] > args.g0_min:
        values.append(args.g0_min)
    table = mintime.sweep(args.g0_max, args.g0_min, args.step, N=args.nodes, mode=args.mode, values=values)
    args.out.write_text(table.to_csv(), encoding="utf-8")
    failed = sum(r.status == mintime.FAILED for r in table.rows)
    print(f"{len(table.rows)} rows, {failed} failed", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
