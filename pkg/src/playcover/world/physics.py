"""Fixed-timestep character kinematics, AABB collision and ray casting."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scenario import Box, Scenario, SurfaceClass, Vec3

DT = 0.02
G = 9.81
WALK_SPEED = 6.0
TURN_RATE = math.pi
JUMP_SPEED = 5.0
JUMP_COOLDOWN_MAX = 0.5
CLIMB_SPEED = 3.0

CHAR_HALF_WIDTH = 0.2
CHAR_HEIGHT = 1.7

# side classification slack for snapping; contact distance for wall sliding
_SIDE_EPS = 1e-6
_TOUCH_EPS = 1e-3

_TWO_PI = 2.0 * math.pi

_SOLID, _CLIMB, _TRAP, _PLATFORM = 0, 1, 2, 3
_KIND_TO_CLASS = {
    _SOLID: SurfaceClass.SOLID,
    _CLIMB: SurfaceClass.CLIMBABLE,
    _TRAP: SurfaceClass.STUCK_TRAP,
    _PLATFORM: SurfaceClass.ELEVATOR_PLATFORM,
}
_CLASS_TO_KIND = {v: k for k, v in _KIND_TO_CLASS.items()}


@dataclass(frozen=True, slots=True)
class CharacterState:
    position: Vec3
    velocity: Vec3 = (0.0, 0.0, 0.0)
    heading: float = 0.0
    is_climbing: bool = False
    ground_contact: bool = False
    jump_cooldown: float = 0.0
    frozen: bool = False


@dataclass(frozen=True, slots=True)
class ActionCommand:
    forward: float = 0.0
    turn: float = 0.0
    strafe: float = 0.0
    jump: int = 0

    def __post_init__(self) -> None:
        for name in ("forward", "turn", "strafe"):
            v = getattr(self, name)
            if not (-1.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [-1, 1], got {v}")
        if self.jump not in (0, 1):
            raise ValueError(f"jump must be 0 or 1, got {self.jump}")


def spawn_state(position: Vec3, heading: float = 0.0) -> CharacterState:
    return CharacterState(position=tuple(float(c) for c in position), heading=heading)  # type: ignore[arg-type]


def forward_vector(heading: float) -> Vec3:
    """Unit facing direction for a yaw angle; heading 0 faces +z."""
    return (math.sin(heading), 0.0, math.cos(heading))


def character_box(p: Vec3) -> Box:
    h = CHAR_HALF_WIDTH
    return Box((p[0] - h, p[1], p[2] - h), (p[0] + h, p[1] + CHAR_HEIGHT, p[2] + h))


class CompiledWorld:
    """Scenario geometry flattened into tuples for the inner loops."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.static = tuple(
            (*b.box.as_tuple(), _CLASS_TO_KIND[b.surface_class])
            for b in scenario.blocks
            if b.collision_enabled
        )
        self.elevators = scenario.elevators

    def platforms(self, t: float) -> list[tuple]:
        return [(*e.box_at(t).as_tuple(), _PLATFORM) for e in self.elevators]


_compiled_cache: dict[int, CompiledWorld] = {}


def compiled(scenario: Scenario) -> CompiledWorld:
    cw = _compiled_cache.get(id(scenario))
    if cw is None or cw.scenario is not scenario:
        if len(_compiled_cache) > 64:
            _compiled_cache.clear()
        cw = CompiledWorld(scenario)
        _compiled_cache[id(scenario)] = cw
    return cw


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError("non-finite value passed to the simulator")


def step(scenario: Scenario, state: CharacterState, action: ActionCommand, t: float) -> CharacterState:
    """Advance one character by one fixed step ``DT`` starting at time ``t``."""
    if state.frozen:
        if state.velocity != (0.0, 0.0, 0.0):
            return CharacterState(state.position, (0.0, 0.0, 0.0), state.heading,
                                  False, state.ground_contact, state.jump_cooldown, True)
        return state
    return advance(compiled(scenario), state, action.forward, action.turn, action.strafe, action.jump, t)


def advance(
    cw: CompiledWorld,
    state: CharacterState,
    forward: float,
    turn: float,
    strafe: float,
    jump: int,
    t: float,
) -> CharacterState:
    """Core of :func:`step` taking raw action components."""
    if state.frozen:
        return step(cw.scenario, state, ActionCommand(), t)
    px, py, pz = state.position
    _check_finite(px, py, pz, state.heading, t, forward, turn, strafe)

    heading = state.heading + turn * TURN_RATE * DT
    if heading >= _TWO_PI or heading < 0.0:
        heading %= _TWO_PI
    sh = math.sin(heading)
    ch = math.cos(heading)
    # forward = (sin h, 0, cos h), right = (cos h, 0, -sin h)
    mx = forward * sh + strafe * ch
    mz = forward * ch - strafe * sh
    norm2 = mx * mx + mz * mz
    if norm2 > 1.0:
        inv = 1.0 / math.sqrt(norm2)
        mx *= inv
        mz *= inv
    dx = mx * (WALK_SPEED * DT)
    dz = mz * (WALK_SPEED * DT)

    cooldown = state.jump_cooldown - DT
    if cooldown < 1e-9:
        cooldown = 0.0

    hw = CHAR_HALF_WIDTH
    boxes = cw.static
    carry_x = carry_y = carry_z = 0.0
    if cw.elevators:
        plats_now = cw.platforms(t)
        plats_next = cw.platforms(t + DT)
        for a, b in zip(plats_now, plats_next):
            # standing on the platform at the start of the step
            if (
                abs(py - a[4]) <= _SIDE_EPS
                and px + hw > a[0] and px - hw < a[3]
                and pz + hw > a[2] and pz - hw < a[5]
            ):
                carry_x, carry_y, carry_z = b[0] - a[0], b[4] - a[4], b[2] - a[2]
                px += carry_x
                # land exactly on the new top; summing the offset can leave the feet a hair inside
                py = b[4]
                pz += carry_z
                break
        # platforms first so static blocks get the final say when squeezed
        boxes = tuple(plats_next) + boxes

    # broadphase: keep boxes overlapping the swept volume of this step
    vy = state.velocity[1]
    reach_y = abs(vy) * DT + G * DT * DT + CLIMB_SPEED * DT + JUMP_SPEED * DT + 1e-3
    lo_x = px - hw - abs(dx) - 1e-3
    hi_x = px + hw + abs(dx) + 1e-3
    lo_z = pz - hw - abs(dz) - 1e-3
    hi_z = pz + hw + abs(dz) + 1e-3
    lo_y = py - reach_y
    hi_y = py + CHAR_HEIGHT + reach_y
    near = [
        b for b in boxes
        if b[3] > lo_x and b[0] < hi_x and b[5] > lo_z and b[2] < hi_z and b[4] > lo_y and b[1] < hi_y
    ]

    frozen = False
    climb_push = False

    # x axis
    if dx != 0.0:
        nx = px + dx
        for b in near:
            if (nx + hw > b[0] and nx - hw < b[3] and py + CHAR_HEIGHT > b[1] and py < b[4]
                    and pz + hw > b[2] and pz - hw < b[5]):
                if px - hw >= b[3] - _SIDE_EPS:
                    nx = b[3] + hw
                elif px + hw <= b[0] + _SIDE_EPS:
                    nx = b[0] - hw
                elif dx > 0.0:
                    nx = b[0] - hw
                else:
                    nx = b[3] + hw
                kind = b[6]
                if kind == _TRAP:
                    frozen = True
                elif kind == _CLIMB:
                    climb_push = True
        mx_eff = (nx - px) / DT
        px = nx
    else:
        mx_eff = 0.0

    # z axis
    if dz != 0.0:
        nz = pz + dz
        for b in near:
            if (nz + hw > b[2] and nz - hw < b[5] and py + CHAR_HEIGHT > b[1] and py < b[4]
                    and px + hw > b[0] and px - hw < b[3]):
                if pz - hw >= b[5] - _SIDE_EPS:
                    nz = b[5] + hw
                elif pz + hw <= b[2] + _SIDE_EPS:
                    nz = b[2] - hw
                elif dz > 0.0:
                    nz = b[2] - hw
                else:
                    nz = b[5] + hw
                kind = b[6]
                if kind == _TRAP:
                    frozen = True
                elif kind == _CLIMB:
                    climb_push = True
        mz_eff = (nz - pz) / DT
        pz = nz
    else:
        mz_eff = 0.0

    # vertical velocity
    jump_now = False
    if climb_push:
        vy = CLIMB_SPEED
        climbing = True
    elif state.is_climbing and not state.ground_contact and _touching_climbable(near, px, py, pz):
        vy = -CLIMB_SPEED
        climbing = True
    else:
        climbing = False
        if jump and state.ground_contact and state.jump_cooldown <= 0.0:
            vy = JUMP_SPEED
            cooldown = JUMP_COOLDOWN_MAX
            jump_now = True
        else:
            if state.is_climbing and vy > 0.0:
                vy = 0.0
            vy -= G * DT

    # y axis
    dy = vy * DT
    ground = False
    ny = py + dy
    for b in near:
        if (ny + CHAR_HEIGHT > b[1] and ny < b[4] and px + hw > b[0] and px - hw < b[3]
                and pz + hw > b[2] and pz - hw < b[5]):
            if py >= b[4] - _SIDE_EPS:
                ny = b[4]
                ground = True
            elif py + CHAR_HEIGHT <= b[1] + _SIDE_EPS:
                ny = b[1] - CHAR_HEIGHT
            elif dy > 0.0:
                ny = b[1] - CHAR_HEIGHT
            else:
                ny = b[4]
                ground = True
            if b[6] == _TRAP:
                frozen = True
    if ny != py + dy:
        vy = 0.0
    if ground:
        climbing = False
        vy = 0.0
    py = ny
    if jump_now:
        ground = False

    if frozen:
        return CharacterState((px, py, pz), (0.0, 0.0, 0.0), heading, False, ground, cooldown, True)
    return CharacterState((px, py, pz), (mx_eff, vy, mz_eff), heading, climbing, ground, cooldown, False)


def _touching_climbable(near: list, px: float, py: float, pz: float) -> bool:
    hw = CHAR_HALF_WIDTH
    for b in near:
        if b[6] != _CLIMB:
            continue
        if not (py + CHAR_HEIGHT > b[1] and py < b[4]):
            continue
        in_x = px + hw > b[0] and px - hw < b[3]
        in_z = pz + hw > b[2] and pz - hw < b[5]
        if in_z and (abs(px - hw - b[3]) <= _TOUCH_EPS or abs(px + hw - b[0]) <= _TOUCH_EPS):
            return True
        if in_x and (abs(pz - hw - b[5]) <= _TOUCH_EPS or abs(pz + hw - b[2]) <= _TOUCH_EPS):
            return True
    return False


def overlaps_enabled_block(scenario: Scenario, position: Vec3, eps: float = 1e-6) -> bool:
    """True when the character volume penetrates a static enabled block by more than ``eps``."""
    px, py, pz = position
    hw = CHAR_HALF_WIDTH
    for b in compiled(scenario).static:
        if (px + hw > b[0] + eps and px - hw < b[3] - eps
                and py + CHAR_HEIGHT > b[1] + eps and py < b[4] - eps
                and pz + hw > b[2] + eps and pz - hw < b[5] - eps):
            return True
    return False


# --- ray casting ---------------------------------------------------------------

def ray_box(origin: Vec3, direction: Vec3, box: tuple, max_len: float) -> float | None:
    """Slab test; returns the entry distance in ``[0, max_len]`` or ``None``."""
    t0 = 0.0
    t1 = max_len
    for i in range(3):
        o = origin[i]
        d = direction[i]
        lo = box[i]
        hi = box[i + 3]
        if d == 0.0:
            if o < lo or o > hi:
                return None
            continue
        inv = 1.0 / d
        ta = (lo - o) * inv
        tb = (hi - o) * inv
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
        if t0 > t1:
            return None
    return t0


def raycast(
    scenario: Scenario,
    origin: Vec3,
    direction: Vec3,
    max_len: float,
    t: float = 0.0,
) -> tuple[float, SurfaceClass | None]:
    """Nearest hit of a ray against enabled blocks and elevator platforms at time ``t``."""
    if not max_len > 0.0:
        raise ValueError("max_len must be positive")
    norm = math.sqrt(direction[0] ** 2 + direction[1] ** 2 + direction[2] ** 2)
    if not math.isfinite(norm) or abs(norm - 1.0) > 1e-6:
        raise ValueError(f"direction must be a unit vector (norm {norm})")
    cw = compiled(scenario)
    best = max_len
    best_kind = None
    boxes = cw.static + tuple(cw.platforms(t)) if cw.elevators else cw.static
    for b in boxes:
        hit = ray_box(origin, direction, b, best)
        if hit is not None and (hit < best or best_kind is None and hit <= best):
            best = hit
            best_kind = b[6]
    if best_kind is None:
        return max_len, None
    return best, _KIND_TO_CLASS[best_kind]
