"""Closed-loop replanning simulation and the metrics computed from its log."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .forecast import ActorState, NoiseParams, advance_to, kf_update
from .geom import BoundaryCondition, Trajectory, as_vec3, velocity_matrix
from .planner import Planner, PlannerConfig
from .shot import ShotSchedule, ideal_shot_trajectory
from .tsdf import BoundaryQueryWarning, Environment, TsdfGrid, build_tsdf

V_MAX_CHECK = 7.5  # m/s, sanity bound on executed motion
VISIBILITY_SAMPLES = 64


@dataclass(frozen=True)
class ActorScript:
    """Ground-truth actor motion at constant speed.

    ``kind`` is ``"line"`` (from ``points[0]`` along ``direction``),
    ``"circle"`` (``center``/``radius``, counter-clockwise from +x) or
    ``"polyline"`` (through ``points``, holding the last point).
    """

    kind: str
    speed: float
    points: tuple = ()
    direction: tuple = (1.0, 0.0, 0.0)
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if self.kind not in ("line", "circle", "polyline"):
            raise ValueError(f"unknown actor script kind {self.kind!r}")
        if not (math.isfinite(self.speed) and self.speed >= 0):
            raise ValueError("actor speed must be non-negative")
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        if self.kind in ("line", "polyline") and not pts:
            raise ValueError(f"{self.kind} actor script needs points")
        if self.kind == "circle" and not self.radius > 0:
            raise ValueError("circle radius must be positive")
        object.__setattr__(self, "points", pts)

    def position(self, t: float) -> np.ndarray:
        s = self.speed * t
        if self.kind == "line":
            d = as_vec3(self.direction)
            return np.array(self.points[0]) + s * d / np.linalg.norm(d)
        if self.kind == "circle":
            ang = s / self.radius
            c = np.array(self.center, dtype=float)
            return c + self.radius * np.array([math.cos(ang), math.sin(ang), 0.0])
        pts = np.array(self.points)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        return np.array([np.interp(s, cum, pts[:, i]) for i in range(3)])

    def heading(self, t: float, h: float = 1e-3) -> float:
        d = self.position(t + h) - self.position(t)
        if math.hypot(d[0], d[1]) < 1e-12:
            d = np.asarray(self.direction, dtype=float)
        return math.atan2(d[1], d[0])


@dataclass(frozen=True, eq=False)
class Scenario:
    environment: Environment
    actor: ActorScript
    shot: ShotSchedule
    duration_s: float
    drone_start: BoundaryCondition | None = None
    replan_hz: float = 5.0
    measurement_hz: float = 10.0
    noise: NoiseParams = NoiseParams()
    seed: int = 0
    planner: PlannerConfig = PlannerConfig()

    def __post_init__(self):
        if not (self.replan_hz > 0 and self.measurement_hz > 0):
            raise ValueError("rates must be positive")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be positive")


@dataclass(eq=False)
class SimRecord:
    time_s: float
    drone: np.ndarray
    actor_truth: np.ndarray
    actor_est: np.ndarray
    shot: np.ndarray
    plan: Trajectory
    costs: dict
    iterations: int
    termination: str
    solve_ms: float
    visible: bool
    error: str | None = None


@dataclass(eq=False)
class SimLog:
    records: list
    environment: Environment
    grid: TsdfGrid | None = None
    speed_violations: int = 0
    boundary_queries: int = 0
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def array(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def segment_visible(env: Environment, a, b, samples: int = VISIBILITY_SAMPLES) -> bool:
    """True if no sample on segment ``a -> b`` lies inside an obstacle."""
    tau = np.linspace(0.0, 1.0, samples)[:, None]
    pts = (1.0 - tau) * np.asarray(a, float) + tau * np.asarray(b, float)
    return bool(np.all(env.signed_distance(pts) >= 0.0))


def _start_condition(scenario: Scenario) -> BoundaryCondition:
    if scenario.drone_start is not None:
        return scenario.drone_start
    actor = scenario.actor
    truth0 = Trajectory(np.tile(actor.position(0.0), (3, 1)), 1.0)
    start = ideal_shot_trajectory(truth0, actor.heading(0.0), scenario.shot).waypoints[0]
    return BoundaryCondition(start, np.zeros(3))


def plan_from_scenario(scenario: Scenario, grid: TsdfGrid | None = None):
    """A single planning step at ``t = 0`` with the actor's true state known.

    Returns the planner's ``PlanStep``.
    """
    cfg = scenario.planner
    if grid is None:
        grid = build_tsdf(scenario.environment, cfg.tsdf_resolution, cfg.tsdf_truncation)
    actor = scenario.actor
    h = 1e-3
    vel = (actor.position(h) - actor.position(0.0)) / h
    state = ActorState(actor.position(0.0), vel, 1e-4 * np.eye(6), actor.heading(0.0), 0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryQueryWarning)
        return Planner(grid, cfg).plan(state, scenario.shot, _start_condition(scenario))


def run_simulation(scenario: Scenario, grid: TsdfGrid | None = None) -> SimLog:
    """Replan at ``replan_hz`` against a Kalman forecast of the noisy actor.

    The drone executes the first ``1/replan_hz`` seconds of every plan
    exactly. Deterministic for a given scenario (including its seed).
    """
    cfg = scenario.planner
    if grid is None:
        grid = build_tsdf(scenario.environment, cfg.tsdf_resolution, cfg.tsdf_truncation)
    planner = Planner(grid, cfg)
    rng = np.random.default_rng(scenario.seed)
    noise = scenario.noise
    actor = scenario.actor
    step = 1.0 / scenario.replan_hz
    meas_dt = 1.0 / scenario.measurement_hz
    n_steps = int(round(scenario.duration_s * scenario.replan_hz))

    def measure(t):
        return actor.position(t) + rng.normal(0.0, noise.measurement_pos_std, 3)

    state = ActorState.initial(measure(0.0), 0.0, heading=actor.heading(0.0),
                               pos_std=noise.measurement_pos_std)
    meas_index = 1

    bc = _start_condition(scenario)

    records = []
    previous = None
    violations = 0
    hits0 = grid.boundary_hits if grid is not None else 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryQueryWarning)
        for i in range(n_steps):
            t = i * step
            while meas_index * meas_dt <= t + 1e-9:
                tm = meas_index * meas_dt
                state = kf_update(advance_to(state, tm, noise), measure(tm), noise)
                meas_index += 1
            now = advance_to(state, t, noise)

            ps = planner.plan(now, scenario.shot, bc, previous, step)
            res = ps.result
            plan = res.trajectory
            error = res.error
            if error is not None and previous is not None:
                plan = ps.initial  # fall back to the re-anchored previous plan

            truth = actor.position(t)
            records.append(SimRecord(
                time_s=t,
                drone=bc.start_position,
                actor_truth=truth,
                actor_est=now.position,
                shot=ps.shot.waypoints[0].copy(),
                plan=plan,
                costs=ps.terms,
                iterations=res.iterations,
                termination=res.termination.value,
                solve_ms=ps.solve_ms,
                visible=segment_visible(scenario.environment, bc.start_position, truth),
                error=error,
            ))

            t_next = plan.start_time_s + step
            pos = plan.position_at(t_next)
            vel_wp = velocity_matrix(plan.n, plan.dt) @ plan.waypoints
            vel = np.array([np.interp(t_next, plan.times, vel_wp[:, j]) for j in range(3)])
            if np.linalg.norm(pos - bc.start_position) > V_MAX_CHECK * step + 1e-9:
                violations += 1
            bc = BoundaryCondition(pos, vel)
            previous = plan

    hits = (grid.boundary_hits - hits0) if grid is not None else 0
    return SimLog(records, scenario.environment, grid, violations, hits)


# --------------------------------------------------------------------------- metrics


def visibility_metric(log: SimLog) -> float:
    """Percentage of executed steps with an unobstructed drone-actor sightline."""
    if not log.records:
        raise ValueError("empty simulation log")
    return 100.0 * float(np.mean([r.visible for r in log.records]))


def shot_distance_metric(log: SimLog) -> tuple[float, float]:
    """Mean and standard deviation of the drone's distance to the ideal viewpoint."""
    if not log.records:
        raise ValueError("empty simulation log")
    d = np.linalg.norm(log.array("drone") - log.array("shot"), axis=1)
    return float(d.mean()), float(d.std())


def max_step(points) -> float:
    """Largest displacement between consecutive positions."""
    p = np.asarray(points, dtype=float)
    if len(p) < 2:
        return 0.0
    return float(np.max(np.linalg.norm(np.diff(p, axis=0), axis=1)))


def median_solve_ms(log: SimLog) -> float:
    return float(np.median([r.solve_ms for r in log.records]))


# --------------------------------------------------------------------------- export

SIMLOG_COLUMNS = (
    ["time_s", "drone_x", "drone_y", "drone_z", "actor_x", "actor_y", "actor_z",
     "est_x", "est_y", "est_z", "shot_x", "shot_y", "shot_z",
     "J_total", "J_smooth", "J_obs", "J_occ", "J_shot", "iterations", "solve_ms", "visible"]
)


def _fmt(x: float) -> str:
    return repr(float(x))


def simlog_csv(log: SimLog, include_timing: bool = False) -> str:
    """One row per replan. ``solve_ms`` is left empty unless timing is requested,
    so that reruns with the same seed produce identical bytes."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SIMLOG_COLUMNS)
    for r in log.records:
        c = r.costs
        w.writerow(
            [_fmt(r.time_s)]
            + [_fmt(v) for v in (*r.drone, *r.actor_truth, *r.actor_est, *r.shot)]
            + [_fmt(c[k]) for k in ("total", "smooth", "obs", "occ", "shot")]
            + [r.iterations, f"{r.solve_ms:.3f}" if include_timing else "", int(r.visible)]
        )
    return buf.getvalue()


def simlog_json(log: SimLog) -> str:
    """Full-fidelity log including every plan, for replay."""
    out = {
        "environment": log.environment.to_dict(),
        "speed_violations": log.speed_violations,
        "records": [
            {
                "time_s": r.time_s,
                "drone": r.drone.tolist(),
                "actor_truth": r.actor_truth.tolist(),
                "actor_est": r.actor_est.tolist(),
                "shot": r.shot.tolist(),
                "plan": r.plan.waypoints.tolist(),
                "plan_start_s": r.plan.start_time_s,
                "plan_horizon_s": r.plan.horizon_s,
                "costs": r.costs,
                "iterations": r.iterations,
                "termination": r.termination,
                "visible": r.visible,
                "error": r.error,
            }
            for r in log.records
        ],
    }
    return json.dumps(out, indent=1)


def summary(log: SimLog) -> dict:
    mean, std = shot_distance_metric(log)
    return {
        "steps": len(log),
        "visibility_pct": visibility_metric(log),
        "shot_distance_mean_m": mean,
        "shot_distance_std_m": std,
        "max_executed_step_m": max_step(log.array("drone")),
        "speed_violations": log.speed_violations,
        "optimizer_errors": sum(r.error is not None for r in log.records),
        "median_solve_ms": median_solve_ms(log),
    }
