#!/usr/bin/env python3
"""Detector dropout sweep: final placement error vs per-frame miss rate.

The hybrid gate should hold the final error roughly flat as misses climb,
since every missed frame falls back to the kinematic law instead of
stopping the platform.

Usage: python scripts/sweep_dropout.py [n_seeds_per_point]
"""

import sys
from dataclasses import replace

import numpy as np

from viki.config import default_scenario
from viki.harness import run_scenario


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 5
    print(f"{'p_miss':>7s} {'done':>5s} {'|dx| mean':>10s} {'|dy| mean':>10s} "
          f"{'ticks mean':>11s}")
    for p_miss in (0.0, 0.1, 0.2, 0.3, 0.4):
        cfg = default_scenario(task="full", p_miss=p_miss)
        dx, dy, ticks, done = [], [], [], 0
        for seed in range(n):
            result = run_scenario(replace(cfg, seed=seed))
            m = result.metrics(cfg.target_final)
            dx.append(abs(m.final_err_x))
            dy.append(abs(m.final_err_y))
            ticks.append(len(result.log))
            done += int(m.converged)
        print(f"{p_miss:7.2f} {done:3d}/{n} {np.mean(dx):10.4f} "
              f"{np.mean(dy):10.4f} {np.mean(ticks):11.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
