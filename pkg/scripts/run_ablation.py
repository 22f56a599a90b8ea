#!/usr/bin/env python3
"""Paired forgetting-on vs forgetting-off comparison under a mid-run plant
change, over the full operating grid:

    python scripts/run_ablation.py [out_dir]
"""
import sys

from pcac.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/ablation"
    sys.exit(main(["ablate", "--out", out]))
