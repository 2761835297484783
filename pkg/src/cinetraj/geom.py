"""Trajectory types and discrete differentiation on a uniform time grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def as_vec3(v, name: str = "vector") -> np.ndarray:
    """Coerce ``v`` to a finite float64 array of shape (3,)."""
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components: {arr}")
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled 3-D path over ``[start_time_s, start_time_s + horizon_s]``.

    ``waypoints`` has shape (n, 3); waypoint ``k`` sits at time
    ``start_time_s + k * dt`` with ``dt = horizon_s / (n - 1)``.
    """

    waypoints: np.ndarray
    horizon_s: float
    start_time_s: float = 0.0

    def __post_init__(self):
        wp = np.array(self.waypoints, dtype=np.float64)
        if wp.ndim != 2 or wp.shape[1] != 3:
            raise ValueError(f"waypoints must be (n, 3), got {wp.shape}")
        if wp.shape[0] < 3:
            raise ValueError(f"trajectory needs n >= 3 waypoints, got {wp.shape[0]}")
        if not np.all(np.isfinite(wp)):
            raise ValueError("trajectory waypoints must be finite")
        if not (np.isfinite(self.horizon_s) and self.horizon_s > 0):
            raise ValueError(f"horizon_s must be positive, got {self.horizon_s}")
        wp.setflags(write=False)
        object.__setattr__(self, "waypoints", wp)
        object.__setattr__(self, "horizon_s", float(self.horizon_s))
        object.__setattr__(self, "start_time_s", float(self.start_time_s))

    @property
    def n(self) -> int:
        return self.waypoints.shape[0]

    @property
    def dt(self) -> float:
        return self.horizon_s / (self.n - 1)

    @property
    def times(self) -> np.ndarray:
        return self.start_time_s + self.dt * np.arange(self.n)

    def with_waypoints(self, waypoints) -> "Trajectory":
        return Trajectory(waypoints, self.horizon_s, self.start_time_s)

    def same_grid(self, other: "Trajectory", atol: float = 1e-9) -> bool:
        return (
            self.n == other.n
            and abs(self.horizon_s - other.horizon_s) <= atol
            and abs(self.start_time_s - other.start_time_s) <= atol
        )

    def position_at(self, t: float) -> np.ndarray:
        """Piecewise-linear position at absolute time ``t`` (clamped to the horizon)."""
        ts = self.times
        return np.array([np.interp(t, ts, self.waypoints[:, i]) for i in range(3)])


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    start_position: np.ndarray
    start_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "start_position", as_vec3(self.start_position, "start_position"))
        object.__setattr__(self, "start_velocity", as_vec3(self.start_velocity, "start_velocity"))


def straight_line(start, end, n: int, horizon_s: float, start_time_s: float = 0.0) -> Trajectory:
    start, end = as_vec3(start, "start"), as_vec3(end, "end")
    return Trajectory(np.linspace(start, end, n), horizon_s, start_time_s)


def velocity_matrix(n: int, dt: float) -> np.ndarray:
    """(n, n) first-derivative operator: central interior, 2nd-order one-sided ends."""
    if n < 3:
        raise ValueError(f"need n >= 3 for differentiation, got {n}")
    D = np.zeros((n, n))
    D[0, :3] = [-1.5, 2.0, -0.5]
    D[-1, -3:] = [0.5, -2.0, 1.5]
    for k in range(1, n - 1):
        D[k, k - 1] = -0.5
        D[k, k + 1] = 0.5
    return D / dt


def acceleration_matrix(n: int, dt: float) -> np.ndarray:
    """(n, n) second-derivative operator.

    Endpoints use the 4-point one-sided stencil when n >= 4 (exact on cubics),
    otherwise the single 3-point stencil.
    """
    if n < 3:
        raise ValueError(f"need n >= 3 for differentiation, got {n}")
    D = np.zeros((n, n))
    for k in range(1, n - 1):
        D[k, k - 1 : k + 2] = [1.0, -2.0, 1.0]
    if n >= 4:
        D[0, :4] = [2.0, -5.0, 4.0, -1.0]
        D[-1, -4:] = [-1.0, 4.0, -5.0, 2.0]
    else:
        D[0, :3] = [1.0, -2.0, 1.0]
        D[-1, -3:] = [1.0, -2.0, 1.0]
    return D / dt**2


def finite_diff_velocity(traj: Trajectory) -> np.ndarray:
    """Per-waypoint velocity estimates, shape (n, 3), in m/s."""
    return velocity_matrix(traj.n, traj.dt) @ traj.waypoints


def finite_diff_acceleration(traj: Trajectory) -> np.ndarray:
    return acceleration_matrix(traj.n, traj.dt) @ traj.waypoints


def time_shift(traj: Trajectory, elapsed_s: float, extend_velocity) -> Trajectory:
    """Advance the trajectory's clock by ``elapsed_s`` on the same grid.

    Samples inside the old horizon are linearly interpolated; samples past it
    continue in a straight line from the old final waypoint at
    ``extend_velocity``.
    """
    if not (0.0 <= elapsed_s < traj.horizon_s):
        raise ValueError(f"elapsed_s must lie in [0, {traj.horizon_s}), got {elapsed_s}")
    v = as_vec3(extend_velocity, "extend_velocity")
    if elapsed_s == 0.0:
        return Trajectory(traj.waypoints.copy(), traj.horizon_s, traj.start_time_s)

    rel_old = traj.dt * np.arange(traj.n)
    rel_new = elapsed_s + rel_old
    out = np.empty_like(traj.waypoints)
    inside = rel_new <= traj.horizon_s
    for i in range(3):
        out[inside, i] = np.interp(rel_new[inside], rel_old, traj.waypoints[:, i])
    past = rel_new[~inside] - traj.horizon_s
    out[~inside] = traj.waypoints[-1] + past[:, None] * v
    return Trajectory(out, traj.horizon_s, traj.start_time_s + elapsed_s)
