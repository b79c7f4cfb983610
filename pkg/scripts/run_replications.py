#!/usr/bin/env python3
"""Run every bundled scenario in replications/ and print its summary lines.

    python3 scripts/run_replications.py [--out out] [--threads 4] [name ...]
"""
import argparse
import contextlib
import io
import sys
from pathlib import Path

from optlat.cli import main

ROOT = Path(__file__).resolve().parents[1]


def run():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="config stems to run (default: all)")
    ap.add_argument("--out", default="out")
    ap.add_argument("--threads", type=int, default=4)
    args = ap.parse_args()
    configs = sorted((ROOT / "replications").glob("*.yaml"))
    if args.names:
        configs = [c for c in configs if c.stem in args.names]
    failed = 0
    for cfg in configs:
        buf = io.StringIO()
        with contextlib.redirect_stdout(buf):
            rc = main(["--config", str(cfg), "--out", str(Path(args.out) / cfg.stem), "--threads", str(args.threads)])
        failed += rc != 0
        print(f"== {cfg.stem} (exit {rc})")
        for line in buf.getvalue().splitlines():
            print("   " + line)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(run())
