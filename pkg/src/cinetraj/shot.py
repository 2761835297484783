"""Shot parameters, the ideal camera trajectory, and the shot-tracking cost."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import Trajectory


@dataclass(frozen=True)
class ShotSpec:
    """Camera placement relative to the actor.

    ``phi_rel`` is measured from the actor heading (0 = in front, pi = behind)
    and is not wrapped, so a schedule may sweep it past 2*pi. ``screen_pos``
    is only used for gimbal pointing.
    """

    distance_rho: float
    phi_rel: float = math.pi
    theta_rel: float = 0.0
    screen_pos: tuple = (0.5, 0.5)

    def __post_init__(self):
        if not (math.isfinite(self.distance_rho) and self.distance_rho > 0):
            raise ValueError(f"distance_rho must be positive, got {self.distance_rho}")
        if not math.isfinite(self.phi_rel):
            raise ValueError("phi_rel must be finite")
        if not (-math.pi / 2 <= self.theta_rel <= math.pi / 2):
            raise ValueError(f"theta_rel must lie in [-pi/2, pi/2], got {self.theta_rel}")
        sp = tuple(float(s) for s in self.screen_pos)
        if len(sp) != 2 or not all(0.0 <= s <= 1.0 for s in sp):
            raise ValueError(f"screen_pos must be two values in [0, 1], got {self.screen_pos}")
        object.__setattr__(self, "screen_pos", sp)

    def offset(self, heading) -> np.ndarray:
        """Drone position relative to the actor for the given heading(s)."""
        ang = np.asarray(heading, dtype=np.float64) + self.phi_rel
        ct = math.cos(self.theta_rel)
        return self.distance_rho * np.stack(
            [np.cos(ang) * ct, np.sin(ang) * ct, np.full_like(ang, math.sin(self.theta_rel))],
            axis=-1,
        )


@dataclass(frozen=True)
class ShotSchedule:
    """Keyframed shot parameters, linearly interpolated and held at the ends."""

    keyframes: tuple

    def __post_init__(self):
        kf = tuple((float(t), spec) for t, spec in self.keyframes)
        if not kf:
            raise ValueError("a shot schedule needs at least one keyframe")
        times = [t for t, _ in kf]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError(f"keyframe times must be strictly increasing, got {times}")
        object.__setattr__(self, "keyframes", kf)

    @classmethod
    def static(cls, spec: ShotSpec) -> "ShotSchedule":
        return cls(((0.0, spec),))

    def params_at(self, times) -> dict[str, np.ndarray]:
        t = np.atleast_1d(np.asarray(times, dtype=np.float64))
        kt = np.array([k[0] for k in self.keyframes])
        specs = [k[1] for k in self.keyframes]

        def lerp(vals):
            return np.interp(t, kt, np.array(vals, dtype=np.float64))

        return {
            "rho": lerp([s.distance_rho for s in specs]),
            "phi": lerp([s.phi_rel for s in specs]),
            "theta": lerp([s.theta_rel for s in specs]),
            "sp_x": lerp([s.screen_pos[0] for s in specs]),
            "sp_y": lerp([s.screen_pos[1] for s in specs]),
        }

    def spec_at(self, t: float) -> ShotSpec:
        p = self.params_at(t)
        return ShotSpec(
            float(p["rho"][0]),
            float(p["phi"][0]),
            float(p["theta"][0]),
            (float(p["sp_x"][0]), float(p["sp_y"][0])),
        )


def shot_scale_to_distance(ss: float, actor_height_m: float, vertical_fov: float) -> float:
    """Camera distance at which an actor of the given height spans ``ss`` of the frame."""
    if not (0.0 < ss <= 1.0):
        raise ValueError(f"shot scale must lie in (0, 1], got {ss}")
    if not (0.0 < vertical_fov < math.pi):
        raise ValueError(f"vertical_fov must lie in (0, pi), got {vertical_fov}")
    if not actor_height_m > 0:
        raise ValueError("actor height must be positive")
    return actor_height_m / (2.0 * ss * math.tan(vertical_fov / 2.0))


def ideal_shot_trajectory(actor: Trajectory, headings, schedule: ShotSchedule) -> Trajectory:
    """Place the camera on the sphere around each forecast actor position."""
    headings = np.broadcast_to(np.asarray(headings, dtype=np.float64), (actor.n,))
    p = schedule.params_at(actor.times)
    ang = headings + p["phi"]
    ct = np.cos(p["theta"])
    offset = p["rho"][:, None] * np.stack(
        [np.cos(ang) * ct, np.sin(ang) * ct, np.sin(p["theta"])], axis=1
    )
    return Trajectory(actor.waypoints + offset, actor.horizon_s, actor.start_time_s)


def shot_weights(n: int, fixed_start: bool = True) -> np.ndarray:
    """Diagonal of the shot quadratic form: 1 on free waypoints."""
    w = np.ones(n)
    if fixed_start:
        w[0] = 0.0
    return w


def shot_cost(xi_q: Trajectory, xi_shot: Trajectory, fixed_start: bool = True):
    """Mean squared deviation from the ideal shot and its gradient.

    Returns ``(cost, grad)`` with ``cost = sum_k w_k |q_k - s_k|^2 / (2 (n-1))``
    and ``grad = w (q - s) / (n-1)``, where ``w`` zeroes the fixed start.
    """
    if not xi_q.same_grid(xi_shot):
        raise ValueError("xi_q and xi_shot must share the same time grid")
    n = xi_q.n
    w = shot_weights(n, fixed_start)
    diff = xi_q.waypoints - xi_shot.waypoints
    cost = float(np.sum(w[:, None] * diff**2)) / (2.0 * (n - 1))
    grad = w[:, None] * diff / (n - 1)
    return cost, grad
