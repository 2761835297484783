"""Constant-velocity Kalman filter for the actor and its motion forecast."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .geom import Trajectory, as_vec3

HEADING_SPEED_GATE = 0.3  # m/s; below this the previous heading is held
HEADING_SIGMA_GATE = 2.0  # speed must also exceed this many velocity std devs


def wrap_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class NoiseParams:
    process_accel_std: float = 1.0
    measurement_pos_std: float = 1.0

    def __post_init__(self):
        if not (self.process_accel_std > 0 and self.measurement_pos_std > 0):
            raise ValueError("noise standard deviations must be positive")


@dataclass(frozen=True, eq=False)
class ActorState:
    position: np.ndarray
    velocity: np.ndarray
    covariance: np.ndarray
    heading: float = 0.0
    last_update_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position, "position"))
        object.__setattr__(self, "velocity", as_vec3(self.velocity, "velocity"))
        P = np.array(self.covariance, dtype=np.float64)
        if P.shape != (6, 6) or not np.all(np.isfinite(P)):
            raise ValueError("covariance must be a finite 6x6 matrix")
        P = 0.5 * (P + P.T)
        P.setflags(write=False)
        object.__setattr__(self, "covariance", P)
        if not math.isfinite(self.heading):
            raise ValueError("heading must be finite")
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))

    @classmethod
    def initial(cls, position, t: float = 0.0, heading: float = 0.0,
                pos_std: float = 1.0, vel_std: float = 5.0) -> "ActorState":
        """Filter state after a first position fix, with an uninformed velocity."""
        P = np.diag([pos_std**2] * 3 + [vel_std**2] * 3)
        return cls(position, np.zeros(3), P, heading, t)

    @property
    def mean(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity])


def _transition(dt: float) -> np.ndarray:
    F = np.eye(6)
    F[:3, 3:] = dt * np.eye(3)
    return F


def _process_noise(dt: float, accel_std: float) -> np.ndarray:
    """Discrete white-acceleration noise for a position/velocity pair per axis."""
    q = accel_std**2
    Q = np.zeros((6, 6))
    Q[:3, :3] = 0.25 * dt**4 * q * np.eye(3)
    Q[:3, 3:] = Q[3:, :3] = 0.5 * dt**3 * q * np.eye(3)
    Q[3:, 3:] = dt**2 * q * np.eye(3)
    return Q


def kf_predict(state: ActorState, dt: float, noise: NoiseParams) -> ActorState:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    F = _transition(dt)
    x = F @ state.mean
    P = F @ state.covariance @ F.T + _process_noise(dt, noise.process_accel_std)
    return replace(state, position=x[:3], velocity=x[3:], covariance=P,
                   last_update_s=state.last_update_s + dt)


def _heading_from(velocity: np.ndarray, covariance: np.ndarray, previous: float) -> float:
    """Velocity heading, or ``previous`` while the horizontal speed is too low
    or not yet resolved by the filter."""
    speed = math.hypot(velocity[0], velocity[1])
    sigma = math.sqrt(max(0.5 * (covariance[3, 3] + covariance[4, 4]), 0.0))
    if speed > max(HEADING_SPEED_GATE, HEADING_SIGMA_GATE * sigma):
        return math.atan2(velocity[1], velocity[0])
    return previous


def kf_update(state: ActorState, measured_position, noise: NoiseParams) -> ActorState:
    """Position measurement update (Joseph form keeps the covariance PSD)."""
    z = as_vec3(measured_position, "measured_position")
    H = np.hstack([np.eye(3), np.zeros((3, 3))])
    R = noise.measurement_pos_std**2 * np.eye(3)
    P = state.covariance
    S = H @ P @ H.T + R
    K = np.linalg.solve(S, H @ P).T
    x = state.mean + K @ (z - state.position)
    IKH = np.eye(6) - K @ H
    P = IKH @ P @ IKH.T + K @ R @ K.T
    return replace(state, position=x[:3], velocity=x[3:], covariance=P,
                   heading=_heading_from(x[3:], P, state.heading))


def advance_to(state: ActorState, t: float, noise: NoiseParams) -> ActorState:
    """Predict forward to absolute time ``t`` (no-op if already there)."""
    dt = t - state.last_update_s
    if dt < -1e-12:
        raise ValueError(f"cannot predict backwards from {state.last_update_s} to {t}")
    return kf_predict(state, dt, noise) if dt > 1e-12 else state


def filter_measurements(state: ActorState, measurements, noise: NoiseParams) -> ActorState:
    """Fold ``(time_s, position)`` pairs through predict/update."""
    for t, z in measurements:
        state = kf_update(advance_to(state, t, noise), z, noise)
    return state


def forecast_actor(state: ActorState, horizon_s: float, n: int):
    """Constant-velocity forecast on the planner grid.

    Returns the actor trajectory (starting at ``state.last_update_s``) and a
    per-waypoint heading array, constant at the current heading.
    """
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    if not (np.all(np.isfinite(state.mean)) and np.all(np.isfinite(state.covariance))):
        raise ValueError("actor state is not finite")
    t = np.linspace(0.0, horizon_s, n)
    wp = state.position + t[:, None] * state.velocity
    return Trajectory(wp, horizon_s, state.last_update_s), np.full(n, state.heading)


def read_measurements_csv(path) -> list[tuple[float, np.ndarray]]:
    """Read a ``time_s,x,y,z`` log (header required) into time-sorted pairs."""
    rows = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"time_s", "x", "y", "z"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                t = float(row["time_s"])
                p = as_vec3([float(row["x"]), float(row["y"]), float(row["z"])])
            except ValueError as exc:
                raise ValueError(f"{path}:{line}: {exc}") from None
            rows.append((t, p))
    rows.sort(key=lambda r: r[0])
    return rows
