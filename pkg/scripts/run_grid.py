#!/usr/bin/env python3
"""Run the 3x3 operating-condition sweep with the stock controller and write
per-cell records plus a summary CSV:

    python scripts/run_grid.py [out_dir]
"""
import sys

from pcac.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/grid"
    sys.exit(main(["grid", "--out", out]))
