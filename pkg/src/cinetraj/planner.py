"""One planning step: forecast -> ideal shot -> initial guess -> optimize."""

from __future__ import annotations

import time
from dataclasses import dataclass, fields, replace

import numpy as np

from .costs import (
    DEFAULT_EPS_OBS,
    DEFAULT_LAMBDA1,
    DEFAULT_LAMBDA2,
    DEFAULT_LAMBDA3,
    DEFAULT_TAU_SAMPLES,
    CostContext,
    build_smoothness,
    cost_terms,
)
from .forecast import ActorState, forecast_actor
from .geom import BoundaryCondition, Trajectory
from .optimizer import Metric, OptParams, OptResult, build_metric, optimize, straight_line_init, warm_start
from .shot import ShotSchedule, ideal_shot_trajectory
from .tsdf import DEFAULT_RESOLUTION, DEFAULT_TRUNCATION, TsdfGrid


@dataclass(frozen=True)
class PlannerConfig:
    """Every tunable of the planner in one place."""

    n: int = 51
    horizon_s: float = 10.0
    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2
    lambda3: float = DEFAULT_LAMBDA3
    eps_obs: float = DEFAULT_EPS_OBS
    actor_clearance_radius: float = 1.0
    tau_samples: int = DEFAULT_TAU_SAMPLES
    smooth_weights: tuple = (1.0, 2.0)
    eta: float = 2.0
    eps0: float = 1e-6
    eps1: float = 1e-6
    i_max: int = 50
    tsdf_resolution: float = DEFAULT_RESOLUTION
    tsdf_truncation: float = DEFAULT_TRUNCATION

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be >= 3")
        if not self.horizon_s > 0:
            raise ValueError("horizon_s must be positive")
        object.__setattr__(self, "smooth_weights", tuple(float(w) for w in self.smooth_weights))
        self.opt_params()  # validates

    @property
    def dt(self) -> float:
        return self.horizon_s / (self.n - 1)

    def opt_params(self) -> OptParams:
        return OptParams(self.eta, self.eps0, self.eps1, self.i_max)

    def context(self, grid: TsdfGrid | None, actor_traj: Trajectory) -> CostContext:
        return CostContext(
            grid,
            actor_traj,
            lambda1=self.lambda1,
            lambda2=self.lambda2,
            lambda3=self.lambda3,
            eps_obs=self.eps_obs,
            actor_clearance_radius=self.actor_clearance_radius,
            tau_samples=self.tau_samples,
        )

    def with_overrides(self, **kw) -> "PlannerConfig":
        names = {f.name for f in fields(self)}
        unknown = set(kw) - names
        if unknown:
            raise ValueError(f"unknown planner setting(s): {sorted(unknown)}")
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


@dataclass(eq=False)
class PlanStep:
    result: OptResult
    actor_forecast: Trajectory
    headings: np.ndarray
    shot: Trajectory
    initial: Trajectory
    terms: dict
    solve_ms: float


class Planner:
    """Holds the grid and the cached metric across replans.

    The metric does not depend on the boundary condition, so it is factorised
    once per configuration.
    """

    def __init__(self, grid: TsdfGrid | None, config: PlannerConfig = PlannerConfig()):
        self.grid = grid
        self.config = config
        self._metric: Metric | None = None

    @property
    def metric(self) -> Metric:
        if self._metric is None:
            cfg = self.config
            bc = BoundaryCondition(np.zeros(3), np.zeros(3))
            smooth = build_smoothness(cfg.n, cfg.dt, bc, cfg.smooth_weights)
            self._metric = build_metric(smooth, cfg.lambda3)
        return self._metric

    def plan(
        self,
        actor: ActorState,
        schedule: ShotSchedule,
        bc: BoundaryCondition,
        previous: Trajectory | None = None,
        elapsed_s: float = 0.0,
    ) -> PlanStep:
        cfg = self.config
        xi_a, headings = forecast_actor(actor, cfg.horizon_s, cfg.n)
        xi_shot = ideal_shot_trajectory(xi_a, headings, schedule)
        if previous is None:
            init = straight_line_init(bc, xi_shot)
        else:
            tail_v = (xi_shot.waypoints[-1] - xi_shot.waypoints[-2]) / xi_shot.dt
            init = warm_start(previous, elapsed_s, tail_v, bc)
            init = Trajectory(init.waypoints, cfg.horizon_s, xi_shot.start_time_s)
        ctx = cfg.context(self.grid, xi_a)
        smooth = build_smoothness(cfg.n, cfg.dt, bc, cfg.smooth_weights)
        t0 = time.perf_counter()
        result = optimize(init, ctx, smooth, xi_shot, cfg.opt_params(), self.metric)
        solve_ms = 1e3 * (time.perf_counter() - t0)
        terms = cost_terms(result.trajectory, ctx, smooth, xi_shot)
        return PlanStep(result, xi_a, headings, xi_shot, init, terms, solve_ms)
