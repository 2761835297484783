"""Cost functionals on the waypoint grid and their gradients.

Every cost returns a per-waypoint gradient of shape (n, 3). Quadratic terms
(smoothness, shot) use the normalisation ``1/(2(n-1))`` for the value and
``1/(n-1)`` for the gradient. The arc-length weighted terms (obstacle,
occlusion) are Riemann sums over waypoints with weight ``dt``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .geom import BoundaryCondition, Trajectory, velocity_matrix, acceleration_matrix
from .shot import shot_cost
from .tsdf import TsdfGrid

DEFAULT_LAMBDA1 = 10.0
DEFAULT_LAMBDA2 = 0.5
DEFAULT_LAMBDA3 = 5.0
DEFAULT_EPS_OBS = 2.0
DEFAULT_TAU_SAMPLES = 16
DEFAULT_VEL_FLOOR = 1e-3


def hinge(d, eps: float = DEFAULT_EPS_OBS) -> np.ndarray:
    """Smooth obstacle penalty of a signed distance ``d``.

    Linear inside obstacles, quadratic within ``eps`` of the surface, zero
    beyond. C1 everywhere.
    """
    d = np.asarray(d, dtype=np.float64)
    return np.where(
        d < 0.0, -d + 0.5 * eps, np.where(d <= eps, (d - eps) ** 2 / (2.0 * eps), 0.0)
    )


def hinge_slope(d, eps: float = DEFAULT_EPS_OBS) -> np.ndarray:
    d = np.asarray(d, dtype=np.float64)
    return np.where(d < 0.0, -1.0, np.where(d <= eps, (d - eps) / eps, 0.0))


@dataclass(frozen=True, eq=False)
class CostContext:
    grid: TsdfGrid | None
    actor_traj: Trajectory
    lambda1: float = DEFAULT_LAMBDA1
    lambda2: float = DEFAULT_LAMBDA2
    lambda3: float = DEFAULT_LAMBDA3
    eps_obs: float = DEFAULT_EPS_OBS
    actor_clearance_radius: float = 1.0
    tau_samples: int = DEFAULT_TAU_SAMPLES
    vel_floor: float = DEFAULT_VEL_FLOOR

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ValueError("cost weights must be non-negative")
        if not self.eps_obs > 0:
            raise ValueError("eps_obs must be positive")
        if self.tau_samples < 2:
            raise ValueError("tau_samples must be >= 2")
        if not self.actor_clearance_radius >= 0:
            raise ValueError("actor_clearance_radius must be non-negative")
        if not self.vel_floor > 0:
            raise ValueError("vel_floor must be positive")

    @property
    def tau_nodes(self) -> np.ndarray:
        """Midpoint-rule nodes on [0, 1]."""
        return (np.arange(self.tau_samples) + 0.5) / self.tau_samples

    def environment_penalty(self, points):
        """Hinge penalty of the TSDF and its spatial gradient at ``points``."""
        points = np.asarray(points, dtype=np.float64)
        if self.grid is None:
            return np.zeros(points.shape[:-1]), np.zeros(points.shape)
        d, g = self.grid.query(points)
        return hinge(d, self.eps_obs), hinge_slope(d, self.eps_obs)[..., None] * g


def _check_grid(xi_q: Trajectory, ctx: CostContext) -> None:
    if not xi_q.same_grid(ctx.actor_traj):
        raise ValueError("drone and actor trajectories must share the same time grid")


# --------------------------------------------------------------------------- smoothness


@dataclass(frozen=True, eq=False)
class SmoothnessOperator:
    """Quadratic form ``(Tr(q^T A q) + 2 Tr(q^T b) + c) / (2(n-1))``.

    Row and column 0 of ``A`` (and row 0 of ``b``) are zero: the start
    waypoint is fixed and enters only through ``b`` and ``c``.
    """

    A: np.ndarray
    b: np.ndarray
    c: float
    dt: float
    weights: tuple

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def cost(self, xi_q: Trajectory):
        q = xi_q.waypoints
        n = self.n
        if q.shape[0] != n:
            raise ValueError(f"trajectory has {q.shape[0]} waypoints, operator expects {n}")
        Aq = self.A @ q
        val = (np.sum(q * Aq) + 2.0 * np.sum(q * self.b) + self.c) / (2.0 * (n - 1))
        return float(val), (Aq + self.b) / (n - 1)


def difference_matrix(order: int, size: int) -> np.ndarray:
    """Forward difference of the given order on ``size`` samples (unscaled)."""
    stencil = np.array([(-1) ** (order - j) * comb(order, j) for j in range(order + 1)], float)
    rows = size - order
    K = np.zeros((rows, size))
    for r in range(rows):
        K[r, r : r + order + 1] = stencil
    return K


def build_smoothness(
    n: int, dt: float, bc: BoundaryCondition, weights=(1.0,)
) -> SmoothnessOperator:
    """Sum of squared finite-difference derivatives, orders 1..len(weights).

    The derivative of order ``d`` is taken over the extended sequence
    ``[q_-1, q_0, q_1, ..., q_{n-1}]`` where ``q_0`` is the start position and
    the virtual point ``q_-1 = q_0 - v_0 dt`` encodes the start velocity. The
    final waypoint is free.
    """
    if n < 3:
        raise ValueError(f"need n >= 3, got {n}")
    weights = tuple(float(w) for w in weights)
    if not weights or any(w < 0 for w in weights) or not any(w > 0 for w in weights):
        raise ValueError(f"derivative weights must be non-negative and not all zero: {weights}")
    if len(weights) > n - 1:
        raise ValueError("too many derivative orders for this n")

    fixed = np.stack([bc.start_position - bc.start_velocity * dt, bc.start_position])
    A = np.zeros((n - 1, n - 1))
    b = np.zeros((n - 1, 3))
    c = 0.0
    for order, w in enumerate(weights, start=1):
        if w == 0.0:
            continue
        K = difference_matrix(order, n + 1) / dt**order
        K_fix, K_free = K[:, :2], K[:, 2:]
        r_fix = K_fix @ fixed
        A += w * K_free.T @ K_free
        b += w * K_free.T @ r_fix
        c += w * float(np.sum(r_fix**2))

    A_full = np.zeros((n, n))
    A_full[1:, 1:] = A
    b_full = np.zeros((n, 3))
    b_full[1:] = b
    A_full.setflags(write=False)
    b_full.setflags(write=False)
    return SmoothnessOperator(A_full, b_full, c, float(dt), weights)


# --------------------------------------------------------------------------- obstacle


def obstacle_cost(xi_q: Trajectory, ctx: CostContext, functional: bool = False):
    """Arc-length weighted obstacle penalty over the environment and the actor.

    ``J = sum_k c(q_k) |qdot_k| dt``, where ``c`` sums the TSDF hinge and the
    hinge of the distance to the actor's clearance sphere at the same time.

    The default gradient is the exact derivative of this sum. With
    ``functional=True`` the gradient is instead the continuous functional
    gradient ``|qdot| [(I - qhat qhat^T) grad c - c kappa]`` (times ``dt``)
    plus the discrete boundary term, which agrees with the exact one up to
    O(dt^2) in the interior.
    """
    _check_grid(xi_q, ctx)
    q = xi_q.waypoints
    n, dt = xi_q.n, xi_q.dt
    D = velocity_matrix(n, dt)
    qd = D @ q
    speed = np.linalg.norm(qd, axis=1)
    qhat = qd / np.maximum(speed, ctx.vel_floor)[:, None]

    c_env, gc_env = ctx.environment_penalty(q)
    rel = q - ctx.actor_traj.waypoints
    r = np.linalg.norm(rel, axis=1)
    d_act = r - ctx.actor_clearance_radius
    c_act = hinge(d_act, ctx.eps_obs)
    gc_act = hinge_slope(d_act, ctx.eps_obs)[:, None] * rel / np.maximum(r, 1e-12)[:, None]
    c = c_env + c_act
    gc = gc_env + gc_act

    value = float(np.sum(c * speed) * dt)
    h = c[:, None] * qhat
    if not functional:
        grad = dt * (speed[:, None] * gc + D.T @ h)
        return value, grad

    qdd = acceleration_matrix(n, dt) @ q
    sf = np.maximum(speed, ctx.vel_floor)
    kappa = (qdd - qhat * np.sum(qhat * qdd, axis=1)[:, None]) / (sf**2)[:, None]
    proj = gc - qhat * np.sum(qhat * gc, axis=1)[:, None]
    grad = dt * (speed[:, None] * (proj - c[:, None] * kappa) + (D + D.T) @ h)
    return value, grad


# --------------------------------------------------------------------------- occlusion


def _sightlines(q: np.ndarray, a: np.ndarray, ctx: CostContext):
    tau = ctx.tau_nodes
    p = (1.0 - tau)[None, :, None] * q[:, None, :] + tau[None, :, None] * a[:, None, :]
    c, gc = ctx.environment_penalty(p)
    return tau, c, gc


def occlusion_cost(xi_q: Trajectory, ctx: CostContext) -> float:
    """Penalty integrated over the surface swept by drone-to-actor segments.

    ``J = sum_k [ sum_j c(p_k(tau_j)) |L_k| dtau ] |qdot_k| dt`` with
    ``p_k(tau) = (1 - tau) q_k + tau a_k`` and ``L_k = a_k - q_k``.
    """
    _check_grid(xi_q, ctx)
    q, a = xi_q.waypoints, ctx.actor_traj.waypoints
    speed = np.linalg.norm(velocity_matrix(xi_q.n, xi_q.dt) @ q, axis=1)
    _, c, _ = _sightlines(q, a, ctx)
    line = c.mean(axis=1) * np.linalg.norm(a - q, axis=1)
    return float(np.sum(line * speed) * xi_q.dt)


def occlusion_gradient(xi_q: Trajectory, ctx: CostContext, functional: bool = False) -> np.ndarray:
    """Gradient of the occlusion cost with respect to the waypoints.

    By default this is the exact derivative of the discretised cost,
    ``dt [ |qdot_k| dG_k/dq_k + D^T (G qhat) ]`` with
    ``G_k = int c(p_k) |L_k| dtau``. It stays bounded when the drone hovers.

    With ``functional=True`` the continuous functional gradient is returned
    instead. Integrand over tau (row-vector form)::

        grad c^T |L| |qdot| [(1 - tau) I - (qhat + tau (adot/|qdot| - qhat)) qhat^T]
        - c |qdot| [Lhat^T + Lhat^T Ldot qhat^T / |qdot| + |L| kappa^T]

    with ``Ldot = adot - qdot`` and
    ``kappa = (I - qhat qhat^T) qddot / |qdot|^2``. Derivatives come from the
    grid's finite-difference operators and ``|qdot|`` is floored in the
    denominators. The result is scaled by ``dt`` and the discrete boundary
    term ``dt (D + D^T)(G qhat)``, ``G = int c |L| dtau``, is added; it is
    non-zero only on the first and last two waypoints, where the free end
    of the trajectory contributes.
    """
    _check_grid(xi_q, ctx)
    q, a = xi_q.waypoints, ctx.actor_traj.waypoints
    n, dt = xi_q.n, xi_q.dt
    D = velocity_matrix(n, dt)
    qd = D @ q
    if not functional:
        speed = np.linalg.norm(qd, axis=1)
        qhat = qd / np.maximum(speed, ctx.vel_floor)[:, None]
        L = a - q
        L_len = np.linalg.norm(L, axis=1)
        L_hat = L / np.maximum(L_len, 1e-12)[:, None]
        tau, c, gc = _sightlines(q, a, ctx)
        dG = ((1.0 - tau)[None, :, None] * gc).mean(axis=1) * L_len[:, None] \
            - c.mean(axis=1)[:, None] * L_hat
        G = c.mean(axis=1) * L_len
        return dt * (speed[:, None] * dG + D.T @ (G[:, None] * qhat))
    qdd = acceleration_matrix(n, dt) @ q
    ad = D @ a
    speed = np.linalg.norm(qd, axis=1)
    sf = np.maximum(speed, ctx.vel_floor)
    qhat = qd / sf[:, None]
    kappa = (qdd - qhat * np.sum(qhat * qdd, axis=1)[:, None]) / (sf**2)[:, None]
    L = a - q
    L_len = np.linalg.norm(L, axis=1)
    L_hat = L / np.maximum(L_len, 1e-12)[:, None]
    L_dot = ad - qd

    tau, c, gc = _sightlines(q, a, ctx)
    t = tau[None, :, None]
    lever = qhat[:, None, :] + t * (ad / sf[:, None] - qhat)[:, None, :]
    # transpose of grad c^T [(1 - tau) I - lever qhat^T] is (1 - tau) grad c - qhat (lever . grad c)
    spatial = (1.0 - t) * gc - qhat[:, None, :] * np.sum(lever * gc, axis=2)[..., None]
    spatial *= (L_len * speed)[:, None, None]
    along = L_hat + qhat * (np.sum(L_hat * L_dot, axis=1) / sf)[:, None] + L_len[:, None] * kappa
    length = -(c * speed[:, None])[..., None] * along[:, None, :]
    functional = (spatial + length).mean(axis=1)

    G = c.mean(axis=1) * L_len
    boundary = (D + D.T) @ (G[:, None] * qhat)
    return dt * (functional + boundary)


# --------------------------------------------------------------------------- total


def total_cost(xi_q: Trajectory, ctx: CostContext, smooth: SmoothnessOperator, xi_shot: Trajectory):
    """Weighted sum ``J_smooth + l1 J_obs + l2 J_occ + l3 J_shot``.

    Returns ``(total, grad, terms)`` where ``terms`` holds the unweighted
    parts.
    """
    j_smooth, g = smooth.cost(xi_q)
    grad = g.copy()
    terms = {"smooth": j_smooth, "obs": 0.0, "occ": 0.0, "shot": 0.0}
    total = j_smooth
    if ctx.lambda1 > 0:
        j, g = obstacle_cost(xi_q, ctx)
        terms["obs"] = j
        total += ctx.lambda1 * j
        grad += ctx.lambda1 * g
    if ctx.lambda2 > 0:
        j = occlusion_cost(xi_q, ctx)
        terms["occ"] = j
        total += ctx.lambda2 * j
        grad += ctx.lambda2 * occlusion_gradient(xi_q, ctx)
    if ctx.lambda3 > 0:
        j, g = shot_cost(xi_q, xi_shot)
        terms["shot"] = j
        total += ctx.lambda3 * j
        grad += ctx.lambda3 * g
    terms["total"] = total
    return total, grad, terms


def cost_terms(xi_q: Trajectory, ctx: CostContext, smooth: SmoothnessOperator, xi_shot: Trajectory) -> dict:
    """Unweighted value of every term regardless of which weights are zero."""
    terms = {
        "smooth": smooth.cost(xi_q)[0],
        "obs": obstacle_cost(xi_q, ctx)[0],
        "occ": occlusion_cost(xi_q, ctx),
        "shot": shot_cost(xi_q, xi_shot)[0],
    }
    terms["total"] = (
        terms["smooth"]
        + ctx.lambda1 * terms["obs"]
        + ctx.lambda2 * terms["occ"]
        + ctx.lambda3 * terms["shot"]
    )
    return terms
