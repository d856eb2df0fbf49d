#!/usr/bin/env python3
"""Generate a hotspot-skewed city, run every allocator on it, and print a
side-by-side metrics table.

Usage:
    python scripts/run_comparison.py --out results/demo [generate flags...]

All remaining flags are forwarded to `fairdispatch generate`.
"""
import argparse
import sys
from pathlib import Path

from fairdispatch import cli

ALLOCATORS = ("fairfoody", "greedy_edt", "weighted")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    args, gen_flags = parser.parse_known_args(argv)

    wl = args.out / "workload"
    if not (wl / "manifest.json").exists():
        rc = cli.main(["generate", *gen_flags, "-o", str(wl)])
        if rc != 0:
            return rc

    run_dirs = []
    for alloc in ALLOCATORS:
        run_dir = args.out / alloc
        rc = cli.main(["simulate", str(wl), "--allocator", alloc, "-o", str(run_dir)])
        if rc != 0:
            return rc
        run_dirs.append(str(run_dir))

    return cli.main(["compare", *run_dirs, "-o", str(args.out / "comparison.csv")])


if __name__ == "__main__":
    sys.exit(main())
