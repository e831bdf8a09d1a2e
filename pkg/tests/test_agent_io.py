import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import box, ground, make_scenario
from playcover.agent_io import (
    CLASS_CODES,
    OBS_SIZE,
    RAY_MAX,
    build_observation,
    encode_class,
    heading_quaternion,
    ray_directions,
)
from playcover.world import DT, ActionCommand, SurfaceClass, load_scenario, raycast, spawn_state, step
from playcover.world.physics import CharacterState


def test_encoding_table():
    assert encode_class(None) == 0.0
    assert encode_class(SurfaceClass.SOLID) == 0.25
    assert encode_class(SurfaceClass.CLIMBABLE) == 0.5
    assert encode_class(SurfaceClass.STUCK_TRAP) == 0.75
    assert encode_class(SurfaceClass.ELEVATOR_PLATFORM) == 1.0


def test_center_at_rest():
    scn = make_scenario(bounds=box((-50, -10, -50), (50, 30, 50)))
    centre = (0.0, 10.0, 0.0)
    obs = build_observation(scn, CharacterState(centre))
    assert len(obs) == OBS_SIZE == 37
    assert obs[0:3] == [0.0, 0.0, 0.0]
    assert obs[3:6] == [0.0, 0.0, 0.0]
    assert obs[12] == 0.0


def test_fresh_jump_cooldown_is_one(flat_world):
    s = step(flat_world, spawn_state((0, 0, 0)), ActionCommand(), 0.0)
    s = CharacterState(s.position, s.velocity, s.heading, False, True, 0.0)
    s = step(flat_world, s, ActionCommand(jump=1), DT)
    obs = build_observation(flat_world, s)
    # cooldown is set to the max and then the step's DT is not yet spent
    assert obs[12] == pytest.approx(s.jump_cooldown / 0.5)
    fresh = CharacterState(s.position, s.velocity, s.heading, False, False, 0.5)
    assert build_observation(flat_world, fresh)[12] == 1.0


def test_forward_ray_to_wall():
    scn = make_scenario([ground(), {"box": box((-5, 0, 3), (5, 4, 4))}])
    s = CharacterState((0.0, 0.0, 0.0), heading=0.0)
    obs = build_observation(scn, s)
    d, cls = raycast(scn, (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), RAY_MAX)
    assert obs[13] == pytest.approx(d / RAY_MAX) == pytest.approx(0.15)
    assert obs[14] == CLASS_CODES[cls] == 0.25


def test_down_ray_sees_ground(flat_world):
    obs = build_observation(flat_world, CharacterState((0.0, 0.0, 0.0)))
    # ray 10 is straight down from 1 m above the feet
    assert obs[13 + 2 * 10] == pytest.approx(1.0 / RAY_MAX)
    assert obs[14 + 2 * 10] == 0.25


def test_ray_pattern_is_unit_and_heading_relative():
    for h in (0.0, 1.0, 4.0):
        dirs = ray_directions(h)
        assert len(dirs) == 12
        for d in dirs:
            assert math.sqrt(sum(c * c for c in d)) == pytest.approx(1.0)
        assert dirs[0] == pytest.approx((math.sin(h), 0.0, math.cos(h)))


MESA = load_scenario("mesa")


@settings(max_examples=150, deadline=None)
@given(
    pos=st.tuples(st.floats(-30, 130), st.floats(-15, 45), st.floats(-30, 130)),
    vel=st.tuples(st.floats(-50, 50), st.floats(-50, 50), st.floats(-50, 50)),
    heading=st.floats(-20, 20),
    climbing=st.booleans(),
    grounded=st.booleans(),
    cooldown=st.floats(0, 0.5),
    t=st.floats(0, 1000),
)
def test_observation_is_bounded(pos, vel, heading, climbing, grounded, cooldown, t):
    s = CharacterState(pos, vel, heading, climbing, grounded, cooldown)
    obs = build_observation(MESA, s, t)
    assert len(obs) == 37
    assert all(math.isfinite(v) and -1.0 <= v <= 1.0 for v in obs)
    q = obs[6:10]
    assert abs(math.sqrt(sum(c * c for c in q)) - 1.0) <= 1e-6
    vision = obs[13:]
    assert all(0.0 <= v <= 1.0 for v in vision[0::2])
    assert all(v in CLASS_CODES.values() for v in vision[1::2])
    assert build_observation(MESA, s, t) == obs


def test_quaternion_is_yaw_about_y():
    w, x, y, z = heading_quaternion(math.pi)
    assert (w, x, z) == pytest.approx((0.0, 0.0, 0.0), abs=1e-12)
    assert abs(y) == pytest.approx(1.0)
