"""Randomised sphere-world benchmark: occlusion-aware vs obstacle-only planning."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .forecast import NoiseParams
from .geom import as_vec3
from .planner import PlannerConfig
from .shot import ShotSchedule, ShotSpec
from .sim import ActorScript, Scenario, run_simulation, shot_distance_metric, visibility_metric, median_solve_ms
from .tsdf import Environment, SphereObstacle, build_tsdf

CONDITIONS = {"occ+obs": True, "obs": False}


class PlacementError(RuntimeError):
    pass


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / max(np.dot(ab, ab), 1e-12), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def random_environment(
    seed,
    n_spheres: int,
    bounds=((-30.0, -30.0, 0.0), (30.0, 30.0, 20.0)),
    radius_range=(2.0, 6.0),
    keepout_points=(),
    keepout_segments=(),
    ground_z: float = -math.inf,
    max_tries: int = 1000,
) -> Environment:
    """Uniformly placed spheres that stay clear of the given keep-out zones.

    ``keepout_points`` and ``keepout_segments`` are ``(point, clearance)`` and
    ``((a, b), clearance)`` pairs; a sphere is rejected if its surface comes
    within ``clearance`` of any of them.
    """
    if n_spheres < 0:
        raise ValueError("n_spheres must be >= 0")
    lo, hi = as_vec3(bounds[0]), as_vec3(bounds[1])
    r_lo, r_hi = radius_range
    rng = np.random.default_rng(seed)
    pts = [(as_vec3(p), float(c)) for p, c in keepout_points]
    segs = [((as_vec3(s[0]), as_vec3(s[1])), float(c)) for s, c in keepout_segments]
    spheres = []
    for i in range(n_spheres):
        for _ in range(max_tries):
            center = rng.uniform(lo, hi)
            radius = float(rng.uniform(r_lo, r_hi))
            if any(np.linalg.norm(center - p) < radius + c for p, c in pts):
                continue
            if any(_point_segment_distance(center, a, b) < radius + c for (a, b), c in segs):
                continue
            spheres.append(SphereObstacle(center, radius))
            break
        else:
            raise PlacementError(f"could not place sphere {i} after {max_tries} tries")
    return Environment(lo, hi, tuple(spheres), ground_z)


@dataclass(frozen=True)
class BenchConfig:
    sphere_counts: tuple = (1, 20, 40)
    conditions: tuple = ("occ+obs", "obs")
    n_seeds: int = 100
    base_seed: int = 0
    bounds: tuple = ((-30.0, -30.0, -10.0), (30.0, 30.0, 10.0))
    radius_range: tuple = (2.0, 6.0)
    actor_start: tuple = (-20.0, 0.0, 0.0)
    actor_end: tuple = (20.0, 0.0, 0.0)
    actor_speed: float = 1.5
    corridor_clearance: float = 1.5
    start_clearance: float = 2.0
    shot: ShotSpec = ShotSpec(14.0, math.pi / 2, 0.35)
    replan_hz: float = 5.0
    noise: NoiseParams = NoiseParams()
    planner: PlannerConfig = PlannerConfig()
    workers: int = 1

    def __post_init__(self):
        unknown = set(self.conditions) - set(CONDITIONS)
        if unknown:
            raise ValueError(f"unknown benchmark condition(s) {sorted(unknown)}")
        if self.n_seeds < 1:
            raise ValueError("n_seeds must be >= 1")

    @property
    def duration_s(self) -> float:
        length = np.linalg.norm(np.subtract(self.actor_end, self.actor_start))
        return float(length / self.actor_speed)

    def actor_script(self) -> ActorScript:
        d = np.subtract(self.actor_end, self.actor_start)
        return ActorScript("line", self.actor_speed, points=(self.actor_start,), direction=tuple(d))

    def drone_start(self) -> np.ndarray:
        script = self.actor_script()
        return script.position(0.0) + self.shot.offset(script.heading(0.0))


@dataclass
class CellStats:
    condition: str
    n_spheres: int
    visibility_mean: float
    visibility_std: float
    shot_dist_mean: float
    shot_dist_std: float
    n_ok: int
    n_failed: int
    median_solve_ms: float


@dataclass
class BenchmarkStats:
    cells: list
    raw: list = field(default_factory=list)

    def cell(self, condition: str, n_spheres: int) -> CellStats:
        for c in self.cells:
            if c.condition == condition and c.n_spheres == n_spheres:
                return c
        raise KeyError((condition, n_spheres))

    @property
    def failed(self) -> int:
        return sum(c.n_failed for c in self.cells)


def _env_seed(cfg: BenchConfig, n_spheres: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([cfg.base_seed, n_spheres, index])


def _run_seed(args):
    """All conditions for one (sphere count, seed index) on a shared grid."""
    cfg, n_spheres, index = args
    rows = []
    try:
        env = random_environment(
            _env_seed(cfg, n_spheres, index),
            n_spheres,
            cfg.bounds,
            cfg.radius_range,
            keepout_points=[(cfg.drone_start(), cfg.start_clearance)],
            keepout_segments=[((cfg.actor_start, cfg.actor_end), cfg.corridor_clearance)],
        )
        grid = build_tsdf(env, cfg.planner.tsdf_resolution, cfg.planner.tsdf_truncation)
    except Exception as exc:  # noqa: BLE001 - reported per seed
        return [dict(condition=c, n_spheres=n_spheres, seed=index, ok=False, error=repr(exc))
                for c in cfg.conditions]

    sim_seed = int(_env_seed(cfg, n_spheres, index).generate_state(1)[0])
    for cond in cfg.conditions:
        planner = cfg.planner if CONDITIONS[cond] else replace(cfg.planner, lambda2=0.0)
        scenario = Scenario(
            environment=env,
            actor=cfg.actor_script(),
            shot=ShotSchedule.static(cfg.shot),
            duration_s=cfg.duration_s,
            replan_hz=cfg.replan_hz,
            noise=cfg.noise,
            seed=sim_seed,
            planner=planner,
        )
        try:
            log = run_simulation(scenario, grid)
            errors = sum(r.error is not None for r in log.records)
            mean, std = shot_distance_metric(log)
            rows.append(dict(
                condition=cond, n_spheres=n_spheres, seed=index, ok=True, error="",
                visibility=visibility_metric(log), shot_dist=mean, shot_dist_std=std,
                optimizer_errors=errors, solve_ms=median_solve_ms(log),
            ))
        except Exception as exc:  # noqa: BLE001
            rows.append(dict(condition=cond, n_spheres=n_spheres, seed=index, ok=False,
                             error=repr(exc)))
    return rows


def benchmark_table1(cfg: BenchConfig = BenchConfig()) -> BenchmarkStats:
    """Run every (sphere count, seed) pair and aggregate per condition.

    Jobs may run in parallel; results are merged in job order so the output
    does not depend on scheduling. Failed seeds are excluded and counted.
    """
    jobs = [(cfg, k, i) for k in cfg.sphere_counts for i in range(cfg.n_seeds)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_seed, jobs))
    else:
        results = [_run_seed(j) for j in jobs]
    raw = [row for rows in results for row in rows]

    cells = []
    for cond in cfg.conditions:
        for k in cfg.sphere_counts:
            rows = [r for r in raw if r["condition"] == cond and r["n_spheres"] == k]
            ok = [r for r in rows if r["ok"]]
            vis = np.array([r["visibility"] for r in ok])
            dist = np.array([r["shot_dist"] for r in ok])
            solve = np.array([r["solve_ms"] for r in ok])

            def stat(a, f):
                return float(f(a)) if len(a) else float("nan")

            cells.append(CellStats(
                cond, k, stat(vis, np.mean), stat(vis, np.std), stat(dist, np.mean),
                stat(dist, np.std), len(ok), len(rows) - len(ok), stat(solve, np.median),
            ))
    return BenchmarkStats(cells, raw)


TABLE_COLUMNS = ["condition", "n_spheres", "visibility_mean", "visibility_std",
                 "shot_dist_mean", "shot_dist_std", "n_ok", "n_failed"]


def table_csv(stats: BenchmarkStats) -> str:
    """One row per (condition, sphere count): visibility in percent, distances in metres."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for c in stats.cells:
        w.writerow([c.condition, c.n_spheres]
                   + [f"{v:.6f}" for v in (c.visibility_mean, c.visibility_std,
                                           c.shot_dist_mean, c.shot_dist_std)]
                   + [c.n_ok, c.n_failed])
    return buf.getvalue()


RAW_COLUMNS = ["condition", "n_spheres", "seed", "ok", "visibility", "shot_dist",
               "shot_dist_std", "optimizer_errors", "error"]


def raw_csv(stats: BenchmarkStats) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, RAW_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in stats.raw:
        out = dict(row)
        for k in ("visibility", "shot_dist", "shot_dist_std"):
            if k in out:
                out[k] = repr(float(out[k]))
        w.writerow(out)
    return buf.getvalue()
