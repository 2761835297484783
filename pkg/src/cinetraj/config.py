"""YAML scenario and benchmark configuration.

Every section maps onto one of the library dataclasses, so any default can be
overridden from a file. Errors name the offending key path, e.g.
``planner.lambda2: expected a number, got 'high'``.

Scenario layout::

    seed: 0
    duration_s: 10
    replan_hz: 5            # optional
    measurement_hz: 10      # optional
    environment:
      bounds_min: [-30, -30, -10]
      bounds_max: [30, 30, 10]
      ground_z: null        # null disables the ground plane
      spheres:
        - {center: [0, 7, 0], radius: 3}
    actor: {kind: line, speed: 1.5, points: [[-7.5, 0, 0]], direction: [1, 0, 0]}
    shot: {distance_rho: 11, phi_rel_deg: 90, theta_rel_deg: 11.5}
    # or: shot_keyframes: [{time_s: 0, distance_rho: 8, ...}, ...]
    drone_start: {position: [..], velocity: [..]}   # optional
    noise: {process_accel_std: 1, measurement_pos_std: 1}
    planner: {n: 51, horizon_s: 10, lambda2: 1.0, ...}

Angles are radians; a ``_deg`` suffix on ``phi_rel``/``theta_rel`` takes
degrees instead. Benchmark files use the fields of ``BenchConfig`` at the top
level plus the same ``shot``, ``noise`` and ``planner`` sections.
"""

from __future__ import annotations

import math
from dataclasses import MISSING, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .bench import BenchConfig
from .forecast import NoiseParams
from .geom import BoundaryCondition
from .planner import PlannerConfig
from .shot import ShotSchedule, ShotSpec
from .sim import ActorScript, Scenario
from .tsdf import Environment, SphereObstacle


class ConfigError(ValueError):
    """Invalid or unreadable configuration; the message names the key."""


def load_yaml(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else str(path)
        problem = getattr(exc, "problem", None) or str(exc)
        raise ConfigError(f"{where}: YAML syntax error: {problem}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


# --------------------------------------------------------------------------- coercion


def _number(v, key: str, integer: bool = False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if integer:
        if float(v) != int(v):
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
        return int(v)
    if not math.isfinite(v):
        raise ConfigError(f"{key}: must be finite, got {v!r}")
    return float(v)


def _vector(v, key: str, length: int | None = 3) -> tuple:
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{key}: expected a list of numbers, got {v!r}")
    if length is not None and len(v) != length:
        raise ConfigError(f"{key}: expected {length} numbers, got {len(v)}")
    return tuple(_number(x, f"{key}[{i}]") for i, x in enumerate(v))


def _mapping(v, key: str) -> dict:
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ConfigError(f"{key}: expected a mapping, got {type(v).__name__}")
    return v


def _check_keys(data: dict, allowed, key: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{key}: unknown key(s) {', '.join(map(repr, unknown))}; "
                          f"allowed: {', '.join(sorted(allowed))}")


def _coerce_like(default, v, key: str):
    """Coerce ``v`` to the type of a dataclass default."""
    if isinstance(default, bool):
        if not isinstance(v, bool):
            raise ConfigError(f"{key}: expected true/false, got {v!r}")
        return v
    if isinstance(default, int):
        return _number(v, key, integer=True)
    if isinstance(default, float):
        return _number(v, key)
    if isinstance(default, tuple) and all(isinstance(x, (int, float)) for x in default):
        return _vector(v, key, None)
    return v


def _build(cls, data, key: str, skip=()):
    """Instantiate a flat dataclass from a mapping, type-checking each field."""
    data = _mapping(data, key)
    names = {f.name: f for f in fields(cls) if f.name not in skip}
    _check_keys(data, names, key)
    kw = {}
    for name, value in data.items():
        f = names[name]
        default = f.default if f.default is not MISSING else None
        kw[name] = _coerce_like(default, value, f"{key}.{name}")
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


# --------------------------------------------------------------------------- sections


def planner_from_dict(data, key: str = "planner") -> PlannerConfig:
    return _build(PlannerConfig, data, key)


def noise_from_dict(data, key: str = "noise") -> NoiseParams:
    return _build(NoiseParams, data, key)


_SHOT_KEYS = ("distance_rho", "phi_rel", "theta_rel", "phi_rel_deg", "theta_rel_deg", "screen_pos")


def shot_from_dict(data, key: str = "shot") -> ShotSpec:
    data = _mapping(data, key)
    _check_keys(data, _SHOT_KEYS + ("time_s",), key)
    if "distance_rho" not in data:
        raise ConfigError(f"{key}.distance_rho: required")
    kw = {"distance_rho": _number(data["distance_rho"], f"{key}.distance_rho")}
    for ang in ("phi_rel", "theta_rel"):
        if ang in data and f"{ang}_deg" in data:
            raise ConfigError(f"{key}: give either {ang} or {ang}_deg, not both")
        if ang in data:
            kw[ang] = _number(data[ang], f"{key}.{ang}")
        elif f"{ang}_deg" in data:
            kw[ang] = math.radians(_number(data[f"{ang}_deg"], f"{key}.{ang}_deg"))
    if "screen_pos" in data:
        kw["screen_pos"] = _vector(data["screen_pos"], f"{key}.screen_pos", 2)
    try:
        return ShotSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def schedule_from_dict(data: dict) -> ShotSchedule:
    if "shot" in data and "shot_keyframes" in data:
        raise ConfigError("shot: give either shot or shot_keyframes, not both")
    if "shot_keyframes" in data:
        frames = data["shot_keyframes"]
        if not isinstance(frames, list) or not frames:
            raise ConfigError("shot_keyframes: expected a non-empty list")
        kf = []
        for i, fr in enumerate(frames):
            key = f"shot_keyframes[{i}]"
            fr = _mapping(fr, key)
            if "time_s" not in fr:
                raise ConfigError(f"{key}.time_s: required")
            kf.append((_number(fr["time_s"], f"{key}.time_s"), shot_from_dict(fr, key)))
        try:
            return ShotSchedule(tuple(kf))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"shot_keyframes: {exc}") from None
    if "shot" not in data:
        raise ConfigError("shot: required (or shot_keyframes)")
    return ShotSchedule.static(shot_from_dict(data["shot"]))


def environment_from_dict(data, key: str = "environment") -> Environment:
    data = _mapping(data, key)
    _check_keys(data, ("bounds_min", "bounds_max", "ground_z", "spheres"), key)
    for k in ("bounds_min", "bounds_max"):
        if k not in data:
            raise ConfigError(f"{key}.{k}: required")
    lo = _vector(data["bounds_min"], f"{key}.bounds_min")
    hi = _vector(data["bounds_max"], f"{key}.bounds_max")
    ground = data.get("ground_z")
    ground = -math.inf if ground is None else _number(ground, f"{key}.ground_z")
    spheres = []
    raw = data.get("spheres") or []
    if not isinstance(raw, list):
        raise ConfigError(f"{key}.spheres: expected a list")
    for i, s in enumerate(raw):
        sk = f"{key}.spheres[{i}]"
        s = _mapping(s, sk)
        _check_keys(s, ("center", "radius"), sk)
        if "center" not in s or "radius" not in s:
            raise ConfigError(f"{sk}: needs center and radius")
        try:
            spheres.append(SphereObstacle(_vector(s["center"], f"{sk}.center"),
                                          _number(s["radius"], f"{sk}.radius")))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{sk}: {exc}") from None
    try:
        return Environment(lo, hi, tuple(spheres), ground)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def actor_from_dict(data, key: str = "actor") -> ActorScript:
    data = _mapping(data, key)
    allowed = ("kind", "speed", "points", "direction", "center", "radius")
    _check_keys(data, allowed, key)
    for k in ("kind", "speed"):
        if k not in data:
            raise ConfigError(f"{key}.{k}: required")
    kw = {"kind": str(data["kind"]), "speed": _number(data["speed"], f"{key}.speed")}
    if "points" in data:
        pts = data["points"]
        if not isinstance(pts, list):
            raise ConfigError(f"{key}.points: expected a list of [x, y, z]")
        kw["points"] = tuple(_vector(p, f"{key}.points[{i}]") for i, p in enumerate(pts))
    for k in ("direction", "center"):
        if k in data:
            kw[k] = _vector(data[k], f"{key}.{k}")
    if "radius" in data:
        kw["radius"] = _number(data["radius"], f"{key}.radius")
    try:
        return ActorScript(**kw)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


_SCENARIO_KEYS = ("seed", "duration_s", "replan_hz", "measurement_hz", "environment", "actor",
                  "shot", "shot_keyframes", "drone_start", "noise", "planner")


def scenario_from_dict(data: dict) -> Scenario:
    _check_keys(data, _SCENARIO_KEYS, "scenario")
    for k in ("duration_s", "environment", "actor"):
        if k not in data:
            raise ConfigError(f"{k}: required")
    bc = None
    if data.get("drone_start") is not None:
        ds = _mapping(data["drone_start"], "drone_start")
        _check_keys(ds, ("position", "velocity"), "drone_start")
        if "position" not in ds:
            raise ConfigError("drone_start.position: required")
        vel = _vector(ds["velocity"], "drone_start.velocity") if "velocity" in ds else (0.0, 0.0, 0.0)
        bc = BoundaryCondition(np.array(_vector(ds["position"], "drone_start.position")), np.array(vel))
    kw = dict(
        environment=environment_from_dict(data["environment"]),
        actor=actor_from_dict(data["actor"]),
        shot=schedule_from_dict(data),
        duration_s=_number(data["duration_s"], "duration_s"),
        drone_start=bc,
        noise=noise_from_dict(data.get("noise")),
        seed=_number(data.get("seed", 0), "seed", integer=True),
        planner=planner_from_dict(data.get("planner")),
    )
    for k in ("replan_hz", "measurement_hz"):
        if k in data:
            kw[k] = _number(data[k], k)
    try:
        return Scenario(**kw)
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from None


def load_scenario(path) -> Scenario:
    data = load_yaml(path)
    try:
        return scenario_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def bench_from_dict(data: dict) -> BenchConfig:
    nested = ("shot", "noise", "planner")
    flat = {k: v for k, v in data.items() if k not in nested}
    cfg = _build(BenchConfig, flat, "bench", skip=nested)
    kw = {}
    if "shot" in data:
        kw["shot"] = shot_from_dict(data["shot"])
    if "noise" in data:
        kw["noise"] = noise_from_dict(data["noise"])
    if "planner" in data:
        kw["planner"] = planner_from_dict(data["planner"])
    if "conditions" in flat:
        kw["conditions"] = tuple(str(c) for c in flat["conditions"])
    if "sphere_counts" in flat:
        kw["sphere_counts"] = tuple(_number(c, "bench.sphere_counts", integer=True)
                                    for c in flat["sphere_counts"])
    for k in ("bounds",):
        if k in flat:
            b = flat[k]
            if not isinstance(b, list) or len(b) != 2:
                raise ConfigError(f"bench.{k}: expected [[xmin, ymin, zmin], [xmax, ymax, zmax]]")
            kw[k] = (_vector(b[0], f"bench.{k}[0]"), _vector(b[1], f"bench.{k}[1]"))
    if not kw:
        return cfg
    try:
        return replace(cfg, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bench: {exc}") from None


def load_bench(path) -> BenchConfig:
    data = load_yaml(path)
    try:
        return bench_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
