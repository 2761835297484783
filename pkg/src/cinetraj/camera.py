"""Pan/tilt pointing of a roll-free gimbal camera.

Conventions: pan is yaw about world +z from +x, tilt is elevation of the
optical axis (negative looks down). Image coordinates are normalised to
[0, 1] with ``sp_x`` growing to the right and ``sp_y`` growing downwards.
"""

from __future__ import annotations

import math

import numpy as np

from .geom import as_vec3


def camera_axes(pan: float, tilt: float):
    """Forward, right and up unit vectors of the camera in world coordinates."""
    cp, sp, ct, st = math.cos(pan), math.sin(pan), math.cos(tilt), math.sin(tilt)
    forward = np.array([ct * cp, ct * sp, st])
    right = np.array([sp, -cp, 0.0])
    up = np.array([-st * cp, -st * sp, ct])
    return forward, right, up


def project_to_screen(drone_pos, actor_pos, pan: float, tilt: float,
                      fov_v: float, fov_h: float) -> tuple[float, float]:
    """Normalised image coordinates of ``actor_pos`` seen from ``drone_pos``."""
    w = as_vec3(actor_pos) - as_vec3(drone_pos)
    f, r, u = camera_axes(pan, tilt)
    depth = float(w @ f)
    if depth <= 0:
        raise ValueError("actor is behind the camera")
    x = float(w @ r) / depth
    y = float(w @ u) / depth
    return 0.5 + x / (2.0 * math.tan(fov_h / 2.0)), 0.5 - y / (2.0 * math.tan(fov_v / 2.0))


def gimbal_angles(drone_pos, actor_pos, sp=(0.5, 0.5),
                  fov_v: float = math.radians(60.0), fov_h: float = math.radians(90.0)):
    """Pan and tilt that put the actor's projection at screen position ``sp``."""
    w = as_vec3(actor_pos, "actor_pos") - as_vec3(drone_pos, "drone_pos")
    dist = float(np.linalg.norm(w))
    if dist < 1e-9:
        raise ValueError("actor coincides with the camera origin")
    w /= dist

    # desired ray in camera coordinates (forward, right, up), normalised
    tx = (sp[0] - 0.5) * 2.0 * math.tan(fov_h / 2.0)
    ty = (0.5 - sp[1]) * 2.0 * math.tan(fov_v / 2.0)
    a, b, e = np.array([1.0, tx, ty]) / math.sqrt(1.0 + tx * tx + ty * ty)

    # elevation: a sin(t) + e cos(t) = w_z
    R = math.hypot(a, e)
    s = w[2] / R
    if abs(s) > 1.0 + 1e-12:
        raise ValueError("screen position not reachable without roll for this geometry")
    tilt = math.asin(max(-1.0, min(1.0, s))) - math.atan2(e, a)
    h = a * math.cos(tilt) - e * math.sin(tilt)
    pan = math.atan2(w[1], w[0]) - math.atan2(-b, h)
    pan = math.atan2(math.sin(pan), math.cos(pan))
    return pan, tilt
