"""One planning step, term by term.

Plans once from the ideal viewpoint of the forest scenario and reports how
the optimizer traded the cost terms off against each other.

    python demos/single_plan.py
"""

import warnings
from pathlib import Path

import numpy as np

from cinetraj.config import load_scenario
from cinetraj.costs import cost_terms, build_smoothness
from cinetraj.geom import BoundaryCondition
from cinetraj.sim import plan_from_scenario
from cinetraj.tsdf import BoundaryQueryWarning, build_tsdf

warnings.simplefilter("ignore", BoundaryQueryWarning)

scenario = load_scenario(Path(__file__).resolve().parent.parent / "scenarios" / "forest.yaml")
cfg = scenario.planner
grid = build_tsdf(scenario.environment, cfg.tsdf_resolution, cfg.tsdf_truncation)
step = plan_from_scenario(scenario, grid)
res = step.result

ctx = cfg.context(grid, step.actor_forecast)
bc = BoundaryCondition(step.initial.waypoints[0], np.zeros(3))
smooth = build_smoothness(cfg.n, cfg.dt, bc, cfg.smooth_weights)
before = cost_terms(step.initial, ctx, smooth, step.shot)

print(f"{res.iterations} accepted updates, stopped by {res.termination.value}, "
      f"solve {step.solve_ms:.0f} ms\n")
print(f"{'term':8s} {'initial':>10s} {'optimized':>10s}")
for k in ("smooth", "obs", "occ", "shot", "total"):
    print(f"{k:8s} {before[k]:10.3f} {step.terms[k]:10.3f}")

d_init = np.linalg.norm(step.initial.waypoints - step.shot.waypoints, axis=1)
d_opt = np.linalg.norm(res.trajectory.waypoints - step.shot.waypoints, axis=1)
print(f"\ndistance to the ideal shot: mean {d_init.mean():.2f} m -> {d_opt.mean():.2f} m")
print(f"clearance to the trees:     min {grid.query(step.initial.waypoints)[0].min():.2f} m -> "
      f"{grid.query(res.trajectory.waypoints)[0].min():.2f} m")
