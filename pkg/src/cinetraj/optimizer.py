"""Covariant gradient descent on the total trajectory cost."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded

from .costs import CostContext, SmoothnessOperator, total_cost
from .geom import BoundaryCondition, Trajectory, time_shift
from .shot import shot_weights


MAX_BACKTRACKS = 12
STEP_RELAX = 0.5  # step-scale shrink factor after an accepted update


@dataclass(frozen=True)
class OptParams:
    eta: float = 2.0
    eps0: float = 1e-6
    eps1: float = 1e-6
    i_max: int = 50

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.eps0 < 0 or self.eps1 < 0:
            raise ValueError("stopping tolerances must be non-negative")
        if self.i_max < 1:
            raise ValueError("i_max must be >= 1")


class Termination(str, enum.Enum):
    GRADIENT_TOL = "gradient_tol"
    DECREASE_TOL = "decrease_tol"
    ITERATION_CAP = "iteration_cap"
    NON_FINITE = "non_finite"


@dataclass(frozen=True, eq=False)
class Metric:
    """``M = (A_smooth + lambda3 A_shot) / (n - 1)`` with its banded Cholesky factor.

    ``M`` matches the Hessian of the quadratic part of the total cost, so a
    step ``M^-1 g`` is a Newton step on that part. Only the free block
    (waypoints 1..n-1) is factorised; x, y and z share it.
    """

    M: np.ndarray
    factor: np.ndarray
    bandwidth: int

    def solve(self, g_free: np.ndarray) -> np.ndarray:
        return cho_solve_banded((self.factor, False), g_free)


def build_metric(smooth: SmoothnessOperator, lambda3: float) -> Metric:
    n = smooth.n
    M = (np.asarray(smooth.A) + lambda3 * np.diag(shot_weights(n))) / (n - 1)
    free = M[1:, 1:]
    u = max(1, len(smooth.weights))
    m = free.shape[0]
    ab = np.zeros((u + 1, m))
    for k in range(u + 1):
        ab[u - k, k:] = np.diagonal(free, offset=k)
    try:
        factor = cholesky_banded(ab, lower=False)
    except LinAlgError as exc:
        raise ValueError(f"metric is not positive definite on the free waypoints: {exc}") from None
    M.setflags(write=False)
    return Metric(M, factor, u)


@dataclass(eq=False)
class OptResult:
    trajectory: Trajectory
    iterations: int
    final_cost: float
    cost_history: list
    termination: Termination
    terms: dict = field(default_factory=dict)
    error: str | None = None
    terms_history: list = field(default_factory=list)


def optimize(
    xi_init: Trajectory,
    ctx: CostContext,
    smooth: SmoothnessOperator,
    xi_shot: Trajectory,
    params: OptParams = OptParams(),
    metric: Metric | None = None,
) -> OptResult:
    """Iterate ``q <- q - M^-1 grad J / eta`` on the free waypoints.

    Stops when ``(g^T M^-1 g)^2 / 2 < eps0``, when the last step decreased the
    cost by less than ``eps1``, or after ``i_max`` attempted updates. A step
    that would raise the cost is rejected and retried at half the length, so
    accepted iterates decrease monotonically; after an accepted step the
    length relaxes back towards ``1 / eta``. Waypoint 0 is never modified.
    """
    if metric is None:
        metric = build_metric(smooth, ctx.lambda3)

    xi = xi_init
    cost, grad, terms = total_cost(xi, ctx, smooth, xi_shot)
    if not (np.isfinite(cost) and np.all(np.isfinite(grad))):
        return OptResult(xi, 0, float(cost), [float(cost)], Termination.NON_FINITE, terms,
                         "non-finite cost or gradient at the initial trajectory")

    history = [float(cost)]
    terms_history = [dict(terms)]
    best = (cost, xi, terms)
    termination = Termination.ITERATION_CAP
    error = None
    scale = params.eta
    rejected = 0
    for i in range(params.i_max + 1):
        g_free = grad[1:]
        step = metric.solve(g_free)
        decrement = float(np.sum(g_free * step))
        if decrement**2 / 2.0 < params.eps0:
            termination = Termination.GRADIENT_TOL
            break
        if len(history) > 1 and rejected == 0 and history[-2] - history[-1] < params.eps1:
            termination = Termination.DECREASE_TOL
            break
        if i == params.i_max:
            break
        wp = np.array(xi.waypoints)
        wp[1:] -= step / scale
        if not np.all(np.isfinite(wp)):
            termination, error = Termination.NON_FINITE, f"non-finite update at iteration {i}"
            break
        candidate = xi.with_waypoints(wp)
        c_cost, c_grad, c_terms = total_cost(candidate, ctx, smooth, xi_shot)
        if not (np.isfinite(c_cost) and np.all(np.isfinite(c_grad))):
            termination, error = Termination.NON_FINITE, f"non-finite cost at iteration {i + 1}"
            break
        if c_cost >= cost:
            # overshoot on the non-quadratic terms: retry with a shorter step
            rejected += 1
            if rejected > MAX_BACKTRACKS:
                termination = Termination.DECREASE_TOL
                break
            scale *= 2.0
            continue
        rejected = 0
        scale = max(params.eta, STEP_RELAX * scale)
        xi, cost, grad, terms = candidate, c_cost, c_grad, c_terms
        history.append(float(cost))
        terms_history.append(dict(terms))
        best = (cost, xi, terms)

    return OptResult(
        trajectory=best[1],
        iterations=len(history) - 1,
        final_cost=float(best[0]),
        cost_history=history,
        termination=termination,
        terms=best[2],
        error=error,
        terms_history=terms_history,
    )


def straight_line_init(bc: BoundaryCondition, xi_shot: Trajectory) -> Trajectory:
    """Line from the fixed start to the last ideal shot waypoint."""
    wp = np.linspace(bc.start_position, xi_shot.waypoints[-1], xi_shot.n)
    return Trajectory(wp, xi_shot.horizon_s, xi_shot.start_time_s)


def warm_start(prev, elapsed_s: float, new_shot_tail_velocity, bc: BoundaryCondition) -> Trajectory:
    """Previous solution advanced by ``elapsed_s`` and re-anchored at ``bc``.

    The time-shifted plan is extended past its old horizon in a straight line
    at ``new_shot_tail_velocity``. Any mismatch between its first waypoint and
    the current start is blended out linearly over the horizon.
    """
    traj = prev.trajectory if isinstance(prev, OptResult) else prev
    shifted = time_shift(traj, elapsed_s, new_shot_tail_velocity)
    offset = bc.start_position - shifted.waypoints[0]
    fade = np.linspace(1.0, 0.0, shifted.n)[:, None]
    wp = shifted.waypoints + fade * offset
    wp[0] = bc.start_position
    return shifted.with_waypoints(wp)
