#!/usr/bin/env python3
"""Run the bundled 3-stage placement scenario and save log + plots.

Usage: python scripts/run_placement.py [seed] [outdir]
"""

import sys
from pathlib import Path

from viki.cli import main as cli_main


def main():
    seed = sys.argv[1] if len(sys.argv) > 1 else "0"
    outdir = Path(sys.argv[2] if len(sys.argv) > 2 else "out/placement")
    rc = cli_main(["run", "--scenario", "default", "--seed", seed,
                   "--out", str(outdir)])
    if rc != 0:
        return rc
    return cli_main(["plot", "--log", str(outdir / "log.csv"),
                     "--out", str(outdir / "trajectory.png")])


if __name__ == "__main__":
    sys.exit(main())
