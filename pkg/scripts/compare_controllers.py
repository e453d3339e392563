#!/usr/bin/env python3
"""Compare viki / vs-only / mgbm-static on a single-leg approach.

All modes see the same detection outcome schedule (the hybrid run's trace
is replayed into the others), so differences come from the control law,
not the dice.  An occlusion window is forced mid-approach to show the
vs-only stall.

Usage: python scripts/compare_controllers.py [n_seeds]
"""

import sys
from dataclasses import replace

from viki.config import MODES, default_scenario
from viki.harness import run_scenario, zero_velocity_ticks_after_first_detection


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 3
    base = default_scenario(task="forward", p_miss=0.1, pixel_noise=1.0,
                            occlusions=((2.0, 3.0),), max_ticks=900,
                            mgbm_assumed_extents=(0.1, 0.1, 0.5))
    print(f"{'mode':12s} {'seed':>4s} {'final_dx':>9s} {'final_dy':>9s} "
          f"{'stops':>6s} {'ticks':>6s} {'done':>5s}")
    for seed in range(n):
        trace = None
        for mode in MODES:
            cfg = replace(base, mode=mode, seed=seed)
            result = run_scenario(cfg, trace=trace)
            if mode == "viki":
                trace = result.detections
            m = result.metrics(cfg.target_final)
            stops = zero_velocity_ticks_after_first_detection(result.log)
            print(f"{mode:12s} {seed:4d} {m.final_err_x:+9.4f} "
                  f"{m.final_err_y:+9.4f} {stops:6d} {len(result.log):6d} "
                  f"{str(m.converged):>5s}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
