"""Truncated signed distance fields on a regular voxel grid.

Grids are built analytically from sphere worlds (plus an optional ground
plane), queried by trilinear interpolation, and stored in a small
little-endian binary format::

    offset  type        field
    0       4s          magic  b"TSDF"
    4       <u4         version (1)
    8       <3d         origin (world coordinates of voxel (0,0,0) centre)
    32      <d          resolution
    40      <3I         dims (nx, ny, nz)
    52      <d          truncation
    60      <f4 * N     values, x fastest, then y, then z
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geom import as_vec3

MAGIC = b"TSDF"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sI3dd3Id")

DEFAULT_RESOLUTION = 0.25
DEFAULT_TRUNCATION = 3.0
DEFAULT_VOXEL_CAP = 50_000_000


class TsdfFormatError(ValueError):
    """Raised for corrupt, truncated or incompatible grid files."""


class BoundaryQueryWarning(UserWarning):
    """A query fell outside the mapped region and was treated as free space."""


@dataclass(frozen=True)
class SphereObstacle:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center, "sphere center"))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"sphere radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    def __eq__(self, other):
        return (
            isinstance(other, SphereObstacle)
            and np.array_equal(self.center, other.center)
            and self.radius == other.radius
        )


@dataclass(frozen=True)
class Environment:
    """Sphere obstacles above a ground half-space ``z < ground_z``.

    ``ground_z = -inf`` disables the ground.
    """

    bounds_min: np.ndarray
    bounds_max: np.ndarray
    spheres: tuple = ()
    ground_z: float = -math.inf

    def __post_init__(self):
        lo = as_vec3(self.bounds_min, "bounds_min")
        hi = as_vec3(self.bounds_max, "bounds_max")
        if np.any(hi <= lo):
            raise ValueError(f"degenerate bounds {lo} .. {hi}")
        spheres = tuple(self.spheres)
        for s in spheres:
            if np.any(s.center < lo) or np.any(s.center > hi):
                raise ValueError(f"sphere center {s.center} outside bounds")
        object.__setattr__(self, "bounds_min", lo)
        object.__setattr__(self, "bounds_max", hi)
        object.__setattr__(self, "spheres", spheres)
        object.__setattr__(self, "ground_z", float(self.ground_z))

    def __eq__(self, other):
        return (
            isinstance(other, Environment)
            and np.array_equal(self.bounds_min, other.bounds_min)
            and np.array_equal(self.bounds_max, other.bounds_max)
            and self.spheres == other.spheres
            and self.ground_z == other.ground_z
        )

    def signed_distance(self, points) -> np.ndarray:
        """Exact (untruncated) signed distance to the nearest obstacle."""
        p = np.asarray(points, dtype=np.float64)
        d = p[..., 2] - self.ground_z
        for s in self.spheres:
            d = np.minimum(d, np.linalg.norm(p - s.center, axis=-1) - s.radius)
        return d

    def to_dict(self) -> dict:
        return {
            "bounds": {"min": self.bounds_min.tolist(), "max": self.bounds_max.tolist()},
            "ground_z": None if math.isinf(self.ground_z) else self.ground_z,
            "spheres": [{"center": s.center.tolist(), "radius": s.radius} for s in self.spheres],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Environment":
        try:
            bounds = data["bounds"]
            spheres = tuple(
                SphereObstacle(s["center"], s["radius"]) for s in data.get("spheres") or ()
            )
            ground = data.get("ground_z")
            return cls(
                bounds["min"],
                bounds["max"],
                spheres,
                -math.inf if ground is None else float(ground),
            )
        except KeyError as exc:
            raise ValueError(f"environment: missing key {exc.args[0]!r}") from None


@dataclass(frozen=True, eq=False)
class TsdfGrid:
    origin: np.ndarray
    resolution: float
    dims: tuple
    values: np.ndarray
    truncation: float
    _boundary_hits: list = field(default_factory=lambda: [0], repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "origin", as_vec3(self.origin, "origin"))
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 2:
            raise ValueError(f"dims must be three counts >= 2, got {self.dims}")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        if not self.truncation >= self.resolution:
            raise ValueError("truncation must be >= resolution")
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.shape != dims:
            raise ValueError(f"values shape {vals.shape} does not match dims {dims}")
        vals.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "resolution", float(self.resolution))
        object.__setattr__(self, "truncation", float(self.truncation))

    @property
    def upper(self) -> np.ndarray:
        """World coordinates of the last voxel centre."""
        return self.origin + self.resolution * (np.array(self.dims) - 1)

    @property
    def boundary_hits(self) -> int:
        """Number of out-of-bounds queries answered so far."""
        return self._boundary_hits[0]

    def query(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Interpolated distance and its gradient at ``points`` (..., 3).

        Inside the grid the field is the trilinear interpolant of the eight
        surrounding voxels and the gradient is its exact derivative. Within
        half a voxel of the outer centres the field is clamped to the edge.
        Further out, space is free: ``+truncation`` with zero gradient.
        """
        p = np.asarray(points, dtype=np.float64)
        shape = p.shape[:-1]
        p = p.reshape(-1, 3)
        dims = np.array(self.dims)
        u = (p - self.origin) / self.resolution
        inside = np.all((u >= -0.5) & (u <= dims - 0.5), axis=1)
        n_out = int(np.count_nonzero(~inside))
        if n_out:
            self._boundary_hits[0] += n_out
            warnings.warn(
                f"{n_out} TSDF queries outside the grid treated as free space",
                BoundaryQueryWarning,
                stacklevel=3,
            )

        uc = np.clip(u, 0.0, dims - 1)
        slope_ok = (u >= 0.0) & (u <= dims - 1)
        i0 = np.minimum(np.floor(uc).astype(np.int64), dims - 2)
        f = uc - i0
        g = 1.0 - f
        v = self.values
        ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]
        c000 = v[ix, iy, iz]
        c100 = v[ix + 1, iy, iz]
        c010 = v[ix, iy + 1, iz]
        c110 = v[ix + 1, iy + 1, iz]
        c001 = v[ix, iy, iz + 1]
        c101 = v[ix + 1, iy, iz + 1]
        c011 = v[ix, iy + 1, iz + 1]
        c111 = v[ix + 1, iy + 1, iz + 1]
        fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
        gx, gy, gz = g[:, 0], g[:, 1], g[:, 2]

        # interpolate along x first, then y, then z
        c00 = gx * c000 + fx * c100
        c10 = gx * c010 + fx * c110
        c01 = gx * c001 + fx * c101
        c11 = gx * c011 + fx * c111
        c0 = gy * c00 + fy * c10
        c1 = gy * c01 + fy * c11
        dist = gz * c0 + fz * c1

        dx00 = c100 - c000
        dx10 = c110 - c010
        dx01 = c101 - c001
        dx11 = c111 - c011
        ddx = gz * (gy * dx00 + fy * dx10) + fz * (gy * dx01 + fy * dx11)
        ddy = gz * (c10 - c00) + fz * (c11 - c01)
        ddz = c1 - c0
        grad = np.stack([ddx, ddy, ddz], axis=1) / self.resolution
        grad = np.where(slope_ok, grad, 0.0)

        dist = np.where(inside, dist, self.truncation)
        grad = np.where(inside[:, None], grad, 0.0)
        return dist.reshape(shape), grad.reshape(shape + (3,))


def build_tsdf(
    env: Environment,
    resolution: float = DEFAULT_RESOLUTION,
    truncation: float = DEFAULT_TRUNCATION,
    voxel_cap: int = DEFAULT_VOXEL_CAP,
) -> TsdfGrid:
    """Voxelize ``env`` over its bounds, clamping distances to ``±truncation``."""
    if not resolution > 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    if not truncation >= resolution:
        raise ValueError(f"truncation ({truncation}) must be >= resolution ({resolution})")
    extent = env.bounds_max - env.bounds_min
    dims = tuple(int(math.ceil(e / resolution - 1e-9)) + 1 for e in extent)
    dims = tuple(max(d, 2) for d in dims)
    count = dims[0] * dims[1] * dims[2]
    if count > voxel_cap:
        raise ValueError(f"grid of {dims} = {count} voxels exceeds cap of {voxel_cap}")

    origin = env.bounds_min
    axes = [origin[i] + resolution * np.arange(dims[i]) for i in range(3)]
    z = axes[2]
    values = np.empty(dims, dtype=np.float64)
    values[...] = np.clip(z - env.ground_z, -truncation, truncation)[None, None, :]

    # each sphere only touches voxels within radius + truncation of its centre
    for s in env.spheres:
        reach = s.radius + truncation
        sl = []
        for i in range(3):
            lo = int(max(0, math.floor((s.center[i] - reach - origin[i]) / resolution)))
            hi = int(min(dims[i], math.ceil((s.center[i] + reach - origin[i]) / resolution) + 1))
            sl.append(slice(lo, hi))
        if any(x.start >= x.stop for x in sl):
            continue
        dx = axes[0][sl[0]] - s.center[0]
        dy = axes[1][sl[1]] - s.center[1]
        dz = axes[2][sl[2]] - s.center[2]
        d = (
            np.sqrt(dx[:, None, None] ** 2 + dy[None, :, None] ** 2 + dz[None, None, :] ** 2)
            - s.radius
        )
        block = values[sl[0], sl[1], sl[2]]
        np.minimum(block, d, out=block)

    np.clip(values, -truncation, truncation, out=values)
    return TsdfGrid(origin, resolution, dims, values.astype(np.float32), truncation)


def distance(grid: TsdfGrid, p) -> np.ndarray | float:
    d, _ = grid.query(p)
    return float(d) if d.ndim == 0 else d


def distance_gradient(grid: TsdfGrid, p) -> np.ndarray:
    return grid.query(p)[1]


def grid_to_bytes(grid: TsdfGrid) -> bytes:
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        *grid.origin.tolist(),
        grid.resolution,
        *grid.dims,
        grid.truncation,
    )
    payload = np.asarray(grid.values, dtype="<f4").tobytes(order="F")
    return header + payload


def grid_from_bytes(data: bytes) -> TsdfGrid:
    if len(data) < _HEADER.size:
        raise TsdfFormatError(f"file too short for header ({len(data)} bytes)")
    magic, version, ox, oy, oz, res, nx, ny, nz, trunc = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise TsdfFormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise TsdfFormatError(f"unsupported version {version}")
    expected = nx * ny * nz * 4
    payload = data[_HEADER.size :]
    if len(payload) != expected:
        raise TsdfFormatError(
            f"header declares dims ({nx}, {ny}, {nz}) = {expected} payload bytes, "
            f"found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape((nx, ny, nz), order="F")
    try:
        return TsdfGrid((ox, oy, oz), res, (nx, ny, nz), values.astype(np.float32), trunc)
    except ValueError as exc:
        raise TsdfFormatError(str(exc)) from None


def save_grid(grid: TsdfGrid, path) -> None:
    Path(path).write_bytes(grid_to_bytes(grid))


def load_grid(path) -> TsdfGrid:
    return grid_from_bytes(Path(path).read_bytes())
