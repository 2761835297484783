"""Occlusion-aware camera-drone trajectory planning.

Covariant gradient descent over smoothness, obstacle, occlusion and shot
costs evaluated on a truncated signed distance field, with a Kalman actor
forecast and a closed-loop replanning simulator.
"""

__version__ = "0.1.0"

from .camera import gimbal_angles, project_to_screen
from .costs import CostContext, build_smoothness, obstacle_cost, occlusion_cost, occlusion_gradient, total_cost
from .forecast import ActorState, NoiseParams, forecast_actor, kf_predict, kf_update
from .geom import BoundaryCondition, Trajectory, straight_line
from .optimizer import OptParams, OptResult, Termination, build_metric, optimize
from .planner import Planner, PlannerConfig
from .shot import ShotSchedule, ShotSpec, ideal_shot_trajectory, shot_cost
from .sim import ActorScript, Scenario, plan_from_scenario, run_simulation
from .tsdf import Environment, SphereObstacle, TsdfGrid, build_tsdf, load_grid, save_grid

__all__ = [
    "ActorScript", "ActorState", "BoundaryCondition", "CostContext", "Environment", "NoiseParams",
    "OptParams", "OptResult", "Planner", "PlannerConfig", "Scenario", "ShotSchedule", "ShotSpec",
    "SphereObstacle", "Termination", "Trajectory", "TsdfGrid", "build_metric", "build_smoothness",
    "build_tsdf", "forecast_actor", "gimbal_angles", "ideal_shot_trajectory", "kf_predict",
    "kf_update", "load_grid", "obstacle_cost", "occlusion_cost", "occlusion_gradient", "optimize",
    "plan_from_scenario", "project_to_screen", "run_simulation", "save_grid", "shot_cost",
    "straight_line", "total_cost",
]
