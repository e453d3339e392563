"""Command-line front end: run scenarios, compute metrics, plot logs.

The VIKI_SEED environment variable overrides --seed everywhere.
"""

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import MODES, ScenarioConfig, default_scenario, read_scenario, \
    write_scenario
from .errors import VikiError
from .harness import (
    compute_metrics, read_log_csv, run_scenario, write_log_csv,
    write_metrics_text, zero_velocity_ticks_after_first_detection,
)
from .perception import write_detection_trace


def _resolve_seed(args_seed):
    env = os.environ.get("VIKI_SEED")
    if env is not None:
        return int(env)
    return args_seed


def _load_scenario(path, seed=None, mode=None) -> ScenarioConfig:
    if path == "default":
        cfg = default_scenario()
    else:
        cfg = read_scenario(path)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if mode is not None:
        cfg = replace(cfg, mode=mode)
    return cfg


def cmd_run(args) -> int:
    cfg = _load_scenario(args.scenario, _resolve_seed(args.seed), args.mode)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_scenario(cfg)
    write_log_csv(out / "log.csv", result.log)
    write_detection_trace(out / "detections.csv", result.detections)
    metrics = result.metrics(cfg.target_final)
    write_metrics_text(out / "metrics.txt", metrics)
    write_scenario(cfg, out / "scenario.ini")
    print(f"{len(result.log)} ticks, final stage {result.final_stage.name}, "
          f"final error ({metrics.final_err_x:+.4f}, {metrics.final_err_y:+.4f}) m")
    print(f"wrote {out}/log.csv, detections.csv, metrics.txt, scenario.ini")
    return 0


def cmd_metrics(args) -> int:
    log = read_log_csv(args.log)
    tx, ty = (float(v) for v in args.target.split(","))
    metrics = compute_metrics(log, (tx, ty))
    print(f"final_err_x = {metrics.final_err_x:.9g}")
    print(f"final_err_y = {metrics.final_err_y:.9g}")
    print(f"mse_x = {metrics.mse_x:.9g}")
    print(f"mse_y = {metrics.mse_y:.9g}")
    print(f"zero_velocity_ticks = {metrics.zero_velocity_ticks}")
    return 0


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    log = read_log_csv(args.log)
    if not log:
        print("empty log", file=sys.stderr)
        return 1
    t = [r.t for r in log]
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))

    stage_colors = {1: "tab:green", 2: "tab:blue", 3: "tab:red"}
    ax = axes[0]
    for stage, color in stage_colors.items():
        xs = [r.X_true for r in log if r.state_id == stage]
        ys = [r.Y_true for r in log if r.state_id == stage]
        if xs:
            ax.plot(xs, ys, ".", ms=2, color=color, label=f"stage {stage}")
    ax.plot([r.X_d for r in log if r.X_d == r.X_d],
            [r.Y_d for r in log if r.Y_d == r.Y_d],
            "k+", ms=4, alpha=0.3, label="kinematic target")
    ax.set_xlabel("X [m]")
    ax.set_ylabel("Y [m]")
    ax.set_title("trajectory")
    ax.legend(loc="best", fontsize=8)
    ax.axis("equal")

    ax = axes[1]
    ax.plot(t, [r.nu_cmd for r in log], label="nu [m/s]")
    ax.plot(t, [r.psi_cmd for r in log], label="psi [rad]")
    ax.set_xlabel("t [s]")
    ax.set_title("commands")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")
    return 0


def cmd_compare(args) -> int:
    base = _load_scenario(args.scenario)
    seed0 = _resolve_seed(args.seed)
    rows = []
    for seed in range(seed0, seed0 + args.seeds):
        trace = None
        for mode in MODES:
            try:
                cfg = replace(base, mode=mode, seed=seed)
            except VikiError as exc:
                rows.append((mode, seed, f"skipped: {exc}"))
                continue
            result = run_scenario(cfg, trace=trace)
            if mode == "viki":
                trace = result.detections
            m = result.metrics(cfg.target_final)
            zv = zero_velocity_ticks_after_first_detection(result.log)
            rows.append((mode, seed, m, zv, result.final_stage.name))
    header = (f"{'mode':12s} {'seed':>4s} {'final_dx':>9s} {'final_dy':>9s} "
              f"{'mse_x':>10s} {'mse_y':>10s} {'stops':>6s} {'stage':>9s}")
    print(header)
    print("-" * len(header))
    for row in rows:
        if len(row) == 3:
            print(f"{row[0]:12s} {row[1]:4d} {row[2]}")
            continue
        mode, seed, m, zv, stage = row
        print(f"{mode:12s} {seed:4d} {m.final_err_x:+9.4f} {m.final_err_y:+9.4f} "
              f"{m.mse_x:10.6f} {m.mse_y:10.6f} {zv:6d} {stage:>9s}")
    return 0


def cmd_make_scenario(args) -> int:
    cfg = default_scenario(mode=args.mode, task=args.task)
    write_scenario(cfg, args.out)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="viki",
        description="hybrid visual-servo + kinematic placement simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario and write logs")
    run.add_argument("--scenario", required=True,
                     help="scenario .ini path, or 'default'")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--mode", choices=MODES, default=None)
    run.set_defaults(func=cmd_run)

    met = sub.add_parser("metrics", help="metrics from an existing log CSV")
    met.add_argument("--log", required=True)
    met.add_argument("--target", required=True, metavar="X,Y")
    met.set_defaults(func=cmd_metrics)

    plot = sub.add_parser("plot", help="trajectory/velocity plots from a log")
    plot.add_argument("--log", required=True)
    plot.add_argument("--out", required=True, help="output image file")
    plot.set_defaults(func=cmd_plot)

    cmp_ = sub.add_parser(
        "compare",
        help="run all modes on shared detection traces, print a table")
    cmp_.add_argument("--scenario", required=True)
    cmp_.add_argument("--seeds", type=int, default=1,
                      help="number of consecutive seeds")
    cmp_.add_argument("--seed", type=int, default=0, help="first seed")
    cmp_.set_defaults(func=cmd_compare)

    mk = sub.add_parser("make-scenario", help="write the bundled scenario")
    mk.add_argument("--out", required=True)
    mk.add_argument("--mode", choices=MODES, default="viki")
    mk.add_argument("--task", choices=("forward", "full"), default="full")
    mk.set_defaults(func=cmd_make_scenario)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (VikiError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
