import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cinetraj.costs import CostContext
from cinetraj.geom import Trajectory
from cinetraj.tsdf import Environment, SphereObstacle, build_tsdf

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", deadline=None, max_examples=400)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def sphere_world():
    """One 2 m sphere at the origin inside a 24 m box."""
    return Environment((-12, -12, -12), (12, 12, 12), (SphereObstacle((0, 0, 0), 2.0),))


@pytest.fixture(scope="session")
def sphere_grid(sphere_world):
    return build_tsdf(sphere_world, 0.25, 3.0)


def line_trajectory(a, b, n=21, horizon=4.0, t0=0.0):
    return Trajectory(np.linspace(a, b, n), horizon, t0)


def bisecting_setup(grid, n=21, horizon=4.0, rng=None, wiggle=0.0):
    """Drone on y = -6 and actor on y = +6, both sliding along x past the
    sphere at the origin, so the sphere cuts every sightline near the middle."""
    t = np.linspace(0.0, 1.0, n)
    drone = np.stack([-1.5 + 3.0 * t, np.full(n, -6.0), 0.3 * np.sin(math.pi * t)], axis=1)
    actor = np.stack([-1.0 + 2.0 * t, np.full(n, 6.0), np.zeros(n)], axis=1)
    if rng is not None and wiggle > 0:
        k = np.arange(1, 4)
        coef = rng.normal(0.0, wiggle, (3, 3))
        drone = drone + np.sin(math.pi * np.outer(t, k)) @ coef
    xi = Trajectory(drone, horizon)
    ctx = CostContext(grid, Trajectory(actor, horizon))
    return xi, ctx


def numeric_gradient(f, xi, h=1e-4, rows=None):
    """Central finite differences of scalar ``f(trajectory)`` over waypoints."""
    q = xi.waypoints
    g = np.zeros_like(q)
    for k in range(q.shape[0]) if rows is None else rows:
        for j in range(3):
            e = np.zeros_like(q)
            e[k, j] = h
            g[k, j] = (f(xi.with_waypoints(q + e)) - f(xi.with_waypoints(q - e))) / (2 * h)
    return g


def cosine(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
