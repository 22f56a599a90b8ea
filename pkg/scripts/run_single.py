#!/usr/bin/env python3
"""Run one suppression experiment at the mid-grid operating point and print
the metrics.  Pass a spec file to run a different configuration:

    python scripts/run_single.py [spec.txt] [out_dir]
"""
import sys

from pcac.cli import main

if __name__ == "__main__":
    argv = ["run"]
    if len(sys.argv) > 1:
        argv += ["--spec", sys.argv[1]]
    argv += ["--out", sys.argv[2] if len(sys.argv) > 2 else "out/single"]
    sys.exit(main(argv))
