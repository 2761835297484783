import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cinetraj.geom import Trajectory
from cinetraj.shot import (
    ShotSchedule,
    ShotSpec,
    ideal_shot_trajectory,
    shot_cost,
    shot_scale_to_distance,
)

finite = st.floats(-50, 50, allow_nan=False)


def static_actor(pos=(0.0, 0.0, 0.0), n=21, horizon=10.0):
    return Trajectory(np.tile(pos, (n, 1)), horizon)


def test_scale_to_distance_examples():
    assert shot_scale_to_distance(1.0, 2.0, math.pi / 2) == pytest.approx(1.0)
    assert shot_scale_to_distance(0.25, 1.8, math.radians(60)) == pytest.approx(6.235383, abs=1e-6)
    assert shot_scale_to_distance(0.2, 1.8, 1.0) == pytest.approx(2 * shot_scale_to_distance(0.4, 1.8, 1.0))
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            shot_scale_to_distance(bad, 1.8, 1.0)
    with pytest.raises(ValueError):
        shot_scale_to_distance(0.5, 1.8, math.pi)


def test_spec_validation():
    with pytest.raises(ValueError):
        ShotSpec(0.0)
    with pytest.raises(ValueError):
        ShotSpec(5.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        ShotSpec(5.0, screen_pos=(0.5, 1.2))
    with pytest.raises(ValueError):
        ShotSchedule(((1.0, ShotSpec(5.0)), (1.0, ShotSpec(6.0))))
    with pytest.raises(ValueError):
        ShotSchedule(())


def test_back_shot_and_tilt():
    xi = ideal_shot_trajectory(static_actor(), 0.0, ShotSchedule.static(ShotSpec(5.0, math.pi, 0.0)))
    np.testing.assert_allclose(xi.waypoints, np.tile([-5, 0, 0], (21, 1)), atol=1e-12)
    xi = ideal_shot_trajectory(static_actor(), 0.0, ShotSchedule.static(ShotSpec(2.0, math.pi, math.pi / 6)))
    np.testing.assert_allclose(xi.waypoints[0], [-math.sqrt(3), 0, 1], atol=1e-12)


def test_circling_shot_closed_form():
    rho, theta = 4.0, 0.3
    sched = ShotSchedule(((0.0, ShotSpec(rho, 0.0, theta)), (10.0, ShotSpec(rho, 2 * math.pi, theta))))
    actor = static_actor((1.0, 2.0, 0.5), n=41)
    xi = ideal_shot_trajectory(actor, 0.0, sched)
    ang = 2 * math.pi * actor.times / 10.0
    r = rho * math.cos(theta)
    expect = np.stack([1 + r * np.cos(ang), 2 + r * np.sin(ang), np.full(41, 0.5 + rho * math.sin(theta))], axis=1)
    np.testing.assert_allclose(xi.waypoints, expect, atol=1e-12)
    # a full orbit ends where it started
    np.testing.assert_allclose(xi.waypoints[0], xi.waypoints[-1], atol=1e-12)


def test_schedule_holds_outside_keyframes():
    sched = ShotSchedule(((2.0, ShotSpec(4.0)), (4.0, ShotSpec(8.0))))
    assert sched.spec_at(0.0).distance_rho == 4.0
    assert sched.spec_at(3.0).distance_rho == pytest.approx(6.0)
    assert sched.spec_at(9.0).distance_rho == 8.0


@given(
    st.lists(st.tuples(finite, finite, finite), min_size=5, max_size=5),
    st.floats(-math.pi, math.pi),
    st.floats(0.5, 30),
    st.floats(0, 2 * math.pi),
    st.floats(-1.5, 1.5),
)
def test_sphere_constraint(pts, heading, rho, phi, theta):
    actor = Trajectory(np.array(pts), 4.0)
    xi = ideal_shot_trajectory(actor, heading, ShotSchedule.static(ShotSpec(rho, phi, theta)))
    d = np.linalg.norm(xi.waypoints - actor.waypoints, axis=1)
    np.testing.assert_allclose(d, rho, rtol=1e-12)


def test_shot_cost_examples():
    n = 21
    rng = np.random.default_rng(0)
    s = Trajectory(rng.normal(size=(n, 3)), 5.0)
    cost, grad = shot_cost(s, s)
    assert cost == 0.0 and not grad.any()
    # offset on every waypoint, counting all n (no fixed start)
    q = s.with_waypoints(s.waypoints + [1.0, 0.0, 0.0])
    cost, _ = shot_cost(q, s, fixed_start=False)
    assert cost == pytest.approx(n / (2 * (n - 1)))
    cost, _ = shot_cost(q, s)
    assert cost == pytest.approx(0.5)
    with pytest.raises(ValueError):
        shot_cost(q, Trajectory(s.waypoints, 6.0))


def test_shot_gradient_finite_differences():
    rng = np.random.default_rng(1)
    n, h = 21, 1e-5
    s = Trajectory(rng.normal(size=(n, 3)) * 3, 5.0)
    q = s.with_waypoints(rng.normal(size=(n, 3)) * 3)
    _, grad = shot_cost(q, s)
    num = np.zeros_like(grad)
    for k in range(n):
        for j in range(3):
            e = np.zeros((n, 3))
            e[k, j] = h
            num[k, j] = (shot_cost(q.with_waypoints(q.waypoints + e), s)[0]
                         - shot_cost(q.with_waypoints(q.waypoints - e), s)[0]) / (2 * h)
    assert np.linalg.norm(num - grad) <= 1e-6 * np.linalg.norm(grad)


@given(st.integers(0, 2**32 - 1))
def test_shot_cost_translation_and_linearity(seed):
    rng = np.random.default_rng(seed)
    n = 11
    s = Trajectory(rng.normal(size=(n, 3)), 2.0)
    q = s.with_waypoints(rng.normal(size=(n, 3)))
    shift = rng.normal(size=3) * 10
    c0, g0 = shot_cost(q, s)
    c1, _ = shot_cost(q.with_waypoints(q.waypoints + shift), s.with_waypoints(s.waypoints + shift))
    assert c1 == pytest.approx(c0, rel=1e-9, abs=1e-12)
    delta = rng.normal(size=(n, 3))
    _, g2 = shot_cost(q.with_waypoints(q.waypoints + delta), s)
    expect = delta / (n - 1)
    expect[0] = 0.0
    np.testing.assert_allclose(g2 - g0, expect, atol=1e-12)
