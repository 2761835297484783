"""Command-line entry point: ``cinetraj {plan,sim,bench,tsdf}``.

Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 benchmark
finished with failed seeds. Output goes to ``--out`` or, if that is not
given, to ``$CINETRAJ_OUT`` (default ``./out``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .bench import benchmark_table1, raw_csv, table_csv
from .config import ConfigError, environment_from_dict, load_bench, load_scenario, load_yaml
from .sim import plan_from_scenario, run_simulation, simlog_csv, simlog_json, summary
from .tsdf import build_tsdf, load_grid, save_grid

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_PARTIAL = 4
OUT_ENV = "CINETRAJ_OUT"

log = logging.getLogger("cinetraj")

# flag name -> PlannerConfig field
PLANNER_FLAGS = {
    "n": "n",
    "horizon": "horizon_s",
    "lambda1": "lambda1",
    "lambda2": "lambda2",
    "lambda3": "lambda3",
    "eta": "eta",
    "tau_samples": "tau_samples",
}


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "out")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"--out: cannot create {out} ({exc.strerror})") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"--out: {out} is not writable")
    return out


def _write(path: Path, text: str) -> None:
    path.write_text(text)
    log.info("wrote %s", path)


def _apply_overrides(scenario, args):
    over = {f: getattr(args, k) for k, f in PLANNER_FLAGS.items() if getattr(args, k, None) is not None}
    try:
        planner = scenario.planner.with_overrides(**over)
    except ValueError as exc:
        raise ConfigError(f"override: {exc}") from None
    kw = {"planner": planner}
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    return replace(scenario, **kw)


def _points_csv(traj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s", "x", "y", "z"])
    for t, p in zip(traj.times, traj.waypoints):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in p])
    return buf.getvalue()


def cmd_plan(args) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    out = _out_dir(args)
    step = plan_from_scenario(scenario)
    res = step.result

    _write(out / "trajectory.csv", _points_csv(res.trajectory))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "J_total", "J_smooth", "J_obs", "J_occ", "J_shot"])
    for i, terms in enumerate(res.terms_history):
        w.writerow([i] + [repr(float(terms[k])) for k in ("total", "smooth", "obs", "occ", "shot")])
    _write(out / "cost_history.csv", buf.getvalue())

    plot = {
        "times": [float(t) for t in res.trajectory.times],
        "optimized": res.trajectory.waypoints.tolist(),
        "actor_forecast": step.actor_forecast.waypoints.tolist(),
        "ideal_shot": step.shot.waypoints.tolist(),
        "initial": step.initial.waypoints.tolist(),
        "environment": scenario.environment.to_dict(),
        "terms": step.terms,
        "termination": res.termination.value,
        "iterations": res.iterations,
    }
    _write(out / "plot_data.json", json.dumps(plot, indent=1))
    print(f"plan: {res.iterations} iterations ({res.termination.value}), "
          f"J={res.final_cost:.6g}, solve {step.solve_ms:.1f} ms")
    if res.error is not None:
        print(f"optimizer error: {res.error}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sim(args) -> int:
    scenario = _apply_overrides(load_scenario(args.scenario), args)
    out = _out_dir(args)
    sim_log = run_simulation(scenario)
    _write(out / "simlog.csv", simlog_csv(sim_log, include_timing=args.timing))
    if args.json:
        _write(out / "simlog.json", simlog_json(sim_log))
    stats = summary(sim_log)
    _write(out / "summary.json", json.dumps(
        {k: v for k, v in stats.items() if args.timing or k != "median_solve_ms"}, indent=1))
    print(f"sim: {stats['steps']} steps, visibility {stats['visibility_pct']:.1f}%, "
          f"shot distance {stats['shot_distance_mean_m']:.2f} m, "
          f"median solve {stats['median_solve_ms']:.1f} ms")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_bench(args.config) if args.config else None
    if cfg is None:
        from .bench import BenchConfig
        cfg = BenchConfig()
    kw = {}
    if args.seeds is not None:
        kw["n_seeds"] = args.seeds
    if args.counts is not None:
        kw["sphere_counts"] = tuple(args.counts)
    if args.workers is not None:
        kw["workers"] = args.workers
    if args.seed is not None:
        kw["base_seed"] = args.seed
    over = {f: getattr(args, k) for k, f in PLANNER_FLAGS.items() if getattr(args, k, None) is not None}
    try:
        if over:
            kw["planner"] = cfg.planner.with_overrides(**over)
        cfg = replace(cfg, **kw)
    except ValueError as exc:
        raise ConfigError(f"override: {exc}") from None
    out = _out_dir(args)
    stats = benchmark_table1(cfg)
    _write(out / "table.csv", table_csv(stats))
    _write(out / "raw.csv", raw_csv(stats))
    for c in stats.cells:
        print(f"{c.condition:8s} {c.n_spheres:3d} spheres: visibility {c.visibility_mean:5.1f} "
              f"+- {c.visibility_std:4.1f}%, shot dist {c.shot_dist_mean:5.2f} +- {c.shot_dist_std:4.2f} m"
              f" ({c.n_ok} ok, {c.n_failed} failed)")
    if stats.failed:
        print(f"bench: {stats.failed} seed run(s) failed; see raw.csv", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_tsdf(args) -> int:
    if args.inspect:
        grid = load_grid(args.path)
    else:
        data = load_yaml(args.path)
        env = environment_from_dict(data.get("environment", data))
        if not args.resolution > 0:
            raise ConfigError(f"--resolution: must be positive, got {args.resolution}")
        if not args.truncation > 0:
            raise ConfigError(f"--truncation: must be positive, got {args.truncation}")
        grid = build_tsdf(env, args.resolution, args.truncation)
        target = Path(args.grid_out) if args.grid_out else _out_dir(args) / "environment.tsdf"
        save_grid(grid, target)
        log.info("wrote %s", target)
    nx, ny, nz = grid.dims
    print(f"dims {nx} x {ny} x {nz} = {nx * ny * nz} voxels, resolution {grid.resolution} m, "
          f"truncation {grid.truncation} m, {grid.values.nbytes / 2**20:.2f} MiB")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cinetraj", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verb = p.add_mutually_exclusive_group()
    verb.add_argument("-v", "--verbose", action="store_true")
    verb.add_argument("-q", "--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
    common.add_argument("--seed", type=int)
    tune = argparse.ArgumentParser(add_help=False)
    tune.add_argument("--n", type=int, help="waypoints per plan")
    tune.add_argument("--horizon", type=float, help="planning horizon in seconds")
    for k in ("lambda1", "lambda2", "lambda3"):
        tune.add_argument(f"--{k}", type=float)
    tune.add_argument("--eta", type=float, help="step damping")
    tune.add_argument("--tau-samples", type=int, dest="tau_samples")

    sp = sub.add_parser("plan", parents=[common, tune], help="single planning step, writes CSV and plot data")
    sp.add_argument("scenario")
    sp.set_defaults(func=cmd_plan)

    sp = sub.add_parser("sim", parents=[common, tune], help="closed-loop replanning simulation")
    sp.add_argument("scenario")
    sp.add_argument("--timing", action="store_true", help="record solve times (output no longer byte-stable)")
    sp.add_argument("--json", action="store_true", help="also write the full log with every plan")
    sp.set_defaults(func=cmd_sim)

    sp = sub.add_parser("bench", parents=[common, tune], help="randomised sphere-world benchmark")
    sp.add_argument("config", nargs="?")
    sp.add_argument("--seeds", type=int, help="seeds per cell")
    sp.add_argument("--counts", type=int, nargs="+", help="sphere counts")
    sp.add_argument("--workers", type=int)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("tsdf", parents=[common], help="build a grid from an environment, or inspect one")
    sp.add_argument("path", help="scenario/environment YAML, or a grid file with --inspect")
    sp.add_argument("--resolution", type=float, default=0.25)
    sp.add_argument("--truncation", type=float, default=3.0)
    sp.add_argument("--grid-out", help="grid file path (default <out>/environment.tsdf)")
    sp.add_argument("--inspect", action="store_true")
    sp.set_defaults(func=cmd_tsdf)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level report
        log.debug("traceback", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
