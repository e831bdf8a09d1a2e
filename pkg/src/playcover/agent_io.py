"""Normalized 37-value observation vector and action mapping."""

from __future__ import annotations

import math

from .world import JUMP_COOLDOWN_MAX, WALK_SPEED, CharacterState, Scenario, SurfaceClass, raycast

RAY_MAX = 20.0
RAY_HEIGHT = 1.0
N_RAYS = 12
OBS_SIZE = 37

CLASS_CODES: dict[SurfaceClass | None, float] = {
    None: 0.0,
    SurfaceClass.SOLID: 0.25,
    SurfaceClass.CLIMBABLE: 0.5,
    SurfaceClass.STUCK_TRAP: 0.75,
    SurfaceClass.ELEVATOR_PLATFORM: 1.0,
}

# (yaw offset from heading, pitch) in radians; pitch of -pi/2 is straight down
RAY_PATTERN: tuple[tuple[float, float], ...] = (
    *((k * math.pi / 4.0, 0.0) for k in range(8)),
    (0.0, -math.pi / 6.0),
    (0.0, -math.pi / 3.0),
    (0.0, -math.pi / 2.0),
    (0.0, math.pi / 6.0),
)


def encode_class(surface: SurfaceClass | None) -> float:
    return CLASS_CODES[surface]


def ray_directions(heading: float) -> list[tuple[float, float, float]]:
    dirs = []
    for yaw, pitch in RAY_PATTERN:
        if pitch == -math.pi / 2.0:
            dirs.append((0.0, -1.0, 0.0))
            continue
        a = heading + yaw
        c = math.cos(pitch)
        dirs.append((c * math.sin(a), math.sin(pitch), c * math.cos(a)))
    return dirs


def heading_quaternion(heading: float) -> tuple[float, float, float, float]:
    """Unit quaternion (w, x, y, z) of a yaw rotation about +y."""
    return (math.cos(heading / 2.0), 0.0, math.sin(heading / 2.0), 0.0)


def _clip(v: float) -> float:
    return -1.0 if v < -1.0 else (1.0 if v > 1.0 else v)


def build_observation(scenario: Scenario, state: CharacterState, t: float = 0.0) -> list[float]:
    """Observation layout: position(3) velocity(3) rotation(4) climbing ground cooldown vision(24)."""
    lo, hi = scenario.bounds.min, scenario.bounds.max
    obs: list[float] = []
    for k in range(3):
        half = (hi[k] - lo[k]) * 0.5
        obs.append(_clip((state.position[k] - (lo[k] + half)) / half))
    obs.extend(_clip(v / WALK_SPEED) for v in state.velocity)
    obs.extend(heading_quaternion(state.heading))
    obs.append(1.0 if state.is_climbing else 0.0)
    obs.append(1.0 if state.ground_contact else 0.0)
    obs.append(_clip(state.jump_cooldown / JUMP_COOLDOWN_MAX))
    px, py, pz = state.position
    origin = (px, py + RAY_HEIGHT, pz)
    for d in ray_directions(state.heading):
        dist, surface = raycast(scenario, origin, d, RAY_MAX, t)
        obs.append(dist / RAY_MAX)
        obs.append(CLASS_CODES[surface])
    return obs
