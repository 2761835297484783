import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cinetraj.tsdf import (
    BoundaryQueryWarning,
    Environment,
    SphereObstacle,
    TsdfFormatError,
    TsdfGrid,
    build_tsdf,
    distance,
    distance_gradient,
    grid_from_bytes,
    grid_to_bytes,
    load_grid,
    save_grid,
)


def test_stored_values(sphere_grid):
    g = sphere_grid
    i = np.round((np.array([5.0, 0, 0]) - g.origin) / g.resolution).astype(int)
    assert g.values[tuple(i)] == pytest.approx(3.0)
    c = np.round((0 - g.origin) / g.resolution).astype(int)
    assert g.values[tuple(c)] == pytest.approx(-2.0)
    shallow = build_tsdf(Environment((-4, -4, -4), (4, 4, 4), (SphereObstacle((0, 0, 0), 2.0),)), 0.25, 1.0)
    c = np.round((0 - shallow.origin) / shallow.resolution).astype(int)
    assert shallow.values[tuple(c)] == pytest.approx(-1.0)


def test_empty_environment_is_all_truncation():
    g = build_tsdf(Environment((0, 0, 0), (5, 5, 5)), 0.5, 2.0)
    assert np.all(g.values == np.float32(2.0))


def test_ground_plane():
    g = build_tsdf(Environment((0, 0, -2), (4, 4, 4), (), ground_z=0.0), 0.5, 3.0)
    assert distance(g, [2.0, 2.0, 1.0]) == pytest.approx(1.0, abs=1e-6)
    assert distance(g, [2.0, 2.0, -1.0]) == pytest.approx(-1.0, abs=1e-6)


def test_query_at_voxel_centres_returns_stored(sphere_grid):
    rng = np.random.default_rng(0)
    idx = rng.integers(0, np.array(sphere_grid.dims), size=(200, 3))
    pts = sphere_grid.origin + idx * sphere_grid.resolution
    d, _ = sphere_grid.query(pts)
    np.testing.assert_allclose(d, sphere_grid.values[idx[:, 0], idx[:, 1], idx[:, 2]], atol=1e-6)


def test_midpoint_interpolation():
    vals = np.ones((2, 2, 2), np.float32)
    vals[1] = 2.0
    g = TsdfGrid((0, 0, 0), 1.0, (2, 2, 2), vals, 5.0)
    assert distance(g, [0.5, 0.5, 0.5]) == pytest.approx(1.5)
    np.testing.assert_allclose(distance_gradient(g, [0.5, 0.3, 0.7]), [1.0, 0.0, 0.0])


def test_dense_sampling_matches_analytic_sdf(sphere_world, sphere_grid):
    rng = np.random.default_rng(1)
    pts = rng.uniform(-4.5, 4.5, size=(20000, 3))
    exact = sphere_world.signed_distance(pts)
    band = np.abs(exact) < sphere_grid.truncation - sphere_grid.resolution
    d, _ = sphere_grid.query(pts[band])
    assert band.sum() > 10000
    assert np.max(np.abs(d - exact[band])) <= sphere_grid.resolution / 2


def test_gradient_directions(sphere_grid):
    p = np.array([3.6, 0.1, 0.1])
    np.testing.assert_allclose(distance_gradient(sphere_grid, p), p / np.linalg.norm(p), atol=0.02)
    np.testing.assert_allclose(distance_gradient(sphere_grid, [9.0, 9.0, 9.0]), 0.0)


def _off_faces(p, grid, h):
    u = (p - grid.origin) / grid.resolution
    frac = u - np.floor(u)
    return np.all((frac > h / grid.resolution) & (frac < 1 - h / grid.resolution), axis=1)


def test_gradient_matches_finite_differences(sphere_grid):
    """The interpolant is only piecewise smooth, so sample points closer than
    the step to a cell face are skipped."""
    rng = np.random.default_rng(2)
    h = 1e-3
    pts = rng.uniform(-4.5, 4.5, size=(3000, 3))
    pts = pts[_off_faces(pts, sphere_grid, 2 * h)]
    _, g = sphere_grid.query(pts)
    fd = np.zeros_like(pts)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd[:, j] = (sphere_grid.query(pts + e)[0] - sphere_grid.query(pts - e)[0]) / (2 * h)
    big = np.linalg.norm(fd, axis=1) > 1e-3
    rel = np.linalg.norm(g - fd, axis=1)[big] / np.linalg.norm(fd, axis=1)[big]
    assert big.sum() > 1000
    assert rel.max() <= 1e-3


def test_out_of_bounds_is_free_space_with_warning(sphere_grid):
    before = sphere_grid.boundary_hits
    with pytest.warns(BoundaryQueryWarning):
        d, g = sphere_grid.query(np.array([[100.0, 0, 0], [0, 0, 50.0]]))
    assert np.all(d == sphere_grid.truncation) and np.all(g == 0)
    assert sphere_grid.boundary_hits == before + 2


def test_round_trip(tmp_path, sphere_grid):
    path = tmp_path / "g.tsdf"
    save_grid(sphere_grid, path)
    back = load_grid(path)
    assert back.values.tobytes() == sphere_grid.values.tobytes()
    assert back.dims == sphere_grid.dims and back.resolution == sphere_grid.resolution
    np.testing.assert_array_equal(back.origin, sphere_grid.origin)
    assert path.read_bytes() == grid_to_bytes(back)


@given(st.tuples(st.integers(2, 6), st.integers(2, 6), st.integers(2, 6)), st.integers(0, 2**31))
def test_round_trip_random_grids(dims, seed):
    vals = np.random.default_rng(seed).uniform(-1, 1, dims).astype(np.float32)
    g = TsdfGrid((0.5, -1.0, 2.0), 0.3, dims, vals, 1.0)
    back = grid_from_bytes(grid_to_bytes(g))
    assert back.values.tobytes() == g.values.tobytes()


def test_format_errors(sphere_grid):
    data = grid_to_bytes(sphere_grid)
    with pytest.raises(TsdfFormatError, match="magic"):
        grid_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(TsdfFormatError, match="payload"):
        grid_from_bytes(data[:-4])
    with pytest.raises(TsdfFormatError):
        grid_from_bytes(data[:10])


def test_validation():
    env = Environment((0, 0, 0), (1, 1, 1))
    with pytest.raises(ValueError):
        build_tsdf(env, 0.0)
    with pytest.raises(ValueError):
        build_tsdf(env, 0.1, voxel_cap=100)
    with pytest.raises(ValueError):
        SphereObstacle((0, 0, 0), -1)
    with pytest.raises(ValueError):
        Environment((0, 0, 0), (1, 1, 1), (SphereObstacle((5, 0, 0), 1),))


def test_doubling_resolution_halves_dims():
    env = Environment((0, 0, 0), (8, 4, 2))
    a = build_tsdf(env, 0.25, 1.0).dims
    b = build_tsdf(env, 0.5, 1.0).dims
    assert all(x - 1 == 2 * (y - 1) for x, y in zip(a, b))


def test_environment_dict_round_trip(sphere_world):
    assert Environment.from_dict(sphere_world.to_dict()) == sphere_world
    with pytest.raises(ValueError):
        Environment.from_dict({})
