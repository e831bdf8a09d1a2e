import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import box, ground, make_scenario
from playcover.world import (
    CHAR_HEIGHT,
    DT,
    JUMP_COOLDOWN_MAX,
    JUMP_SPEED,
    ActionCommand,
    G,
    ScenarioError,
    SurfaceClass,
    dump_scenario,
    load_scenario,
    overlaps_enabled_block,
    parse_scenario,
    raycast,
    spawn_state,
    step,
)
from playcover.world.physics import CharacterState

MINIMAL = """
name: minimal
bounds: {min: [-10, -2, -10], max: [10, 10, 10]}
exploration_boundary: {min: [-10, -2, -10], max: [10, 10, 10]}
initial_spawn: [0, 0, 0]
blocks:
  - box: {min: [-10, -1, -10], max: [10, 0, 10]}
"""


def run(scn, state, action, n, t=0.0):
    for k in range(n):
        state = step(scn, state, action, t + k * DT)
    return state


# --- loading --------------------------------------------------------------------

def test_minimal_document_loads():
    scn = parse_scenario(MINIMAL)
    assert len(scn.blocks) == 1
    assert scn.blocks[0].surface_class is SurfaceClass.SOLID
    assert scn.blocks[0].collision_enabled
    assert scn.estimated_max_points is None


def test_spawn_outside_eb_is_named():
    text = MINIMAL.replace("initial_spawn: [0, 0, 0]", "initial_spawn: [50, 0, 0]")
    with pytest.raises(ScenarioError, match="initial_spawn outside exploration_boundary"):
        parse_scenario(text)


@pytest.mark.parametrize("edit, field", [
    (("name: minimal", "name: minimal\ncolour: red"), "colour"),
    (("max: [10, 0, 10]", "max: [10, -1, 10]"), "extents"),
    (("initial_spawn: [0, 0, 0]", "initial_spawn: [0, 0]"), "initial_spawn"),
    (("exploration_boundary: {min: [-10, -2, -10], max: [10, 10, 10]}",
      "exploration_boundary: {min: [-10, -2, -10], max: [10, 50, 10]}"), "exploration_boundary"),
    (("- box: {min: [-10, -1, -10], max: [10, 0, 10]}",
      "- box: {min: [-10, -1, -10], max: [10, 0, 10]}\n    surface_class: lava"), "surface_class"),
    (("- box: {min: [-10, -1, -10], max: [10, 0, 10]}",
      "- box: {min: [-10, -1, -10], max: [10, 0, 10]}\n    surface_class: stuck_trap\n    collision_enabled: false"),
     "collision_enabled"),
])
def test_malformed_documents_name_the_field(edit, field):
    text = MINIMAL.replace(*edit)
    assert text != MINIMAL
    with pytest.raises(ScenarioError, match=field):
        parse_scenario(text)


def test_not_yaml_at_all():
    with pytest.raises(ScenarioError):
        parse_scenario("blocks: [unclosed")
    with pytest.raises(ScenarioError):
        parse_scenario("just a string")


def test_roi_must_sit_inside_eb():
    with pytest.raises(ScenarioError, match="rois"):
        make_scenario(eb=box((-10, -2, -10), (10, 10, 10)), rois=[{"name": "far", "box": box((20, 0, 20), (30, 5, 30))}])


def test_elevator_first_waypoint_must_match_platform():
    elev = {"platform": box((0, -0.3, 0), (2, 0, 2)), "waypoints": [[5, 0, 5], [5, 3, 5]], "speed": 1}
    with pytest.raises(ScenarioError, match="waypoints"):
        make_scenario(elevators=[elev])


def test_mesa_fixture_readback():
    scn = load_scenario("mesa.scn")
    assert scn.block_count(SurfaceClass.STUCK_TRAP) == 1
    assert scn.block_count(collision=False) == 1
    assert scn.block_count(SurfaceClass.CLIMBABLE) >= 1
    assert len(scn.elevators) == 1
    assert scn.exploration_boundary.contains(scn.initial_spawn)
    # field-by-field round trip through the writer
    again = parse_scenario(dump_scenario(scn))
    assert again == scn


@pytest.mark.parametrize("name", ["flat", "mesa", "corridor", "rooms", "tower_before", "tower_after"])
def test_bundled_fixtures_load(name):
    scn = load_scenario(name)
    assert scn.estimated_max_points and scn.estimated_max_points > 0
    assert not overlaps_enabled_block(scn, scn.initial_spawn)


def test_missing_file():
    with pytest.raises(ScenarioError, match="not found"):
        load_scenario("/nonexistent/nowhere.scn")


# --- kinematics -----------------------------------------------------------------

def test_rest_on_flat_ground(flat_world):
    s0 = spawn_state((0, 0, 0))
    s1 = step(flat_world, s0, ActionCommand(), 0.0)
    assert s1.position == s0.position
    assert s1.ground_contact
    s2 = run(flat_world, s1, ActionCommand(), 200)
    assert s2.position == s0.position


def test_jump_apex_matches_ballistics(flat_world):
    s = run(flat_world, spawn_state((0, 0, 0)), ActionCommand(), 1)
    apex = 0.0
    s = step(flat_world, s, ActionCommand(jump=1), DT)
    assert s.jump_cooldown == pytest.approx(JUMP_COOLDOWN_MAX - DT) or s.jump_cooldown == JUMP_COOLDOWN_MAX
    for k in range(200):
        s = step(flat_world, s, ActionCommand(), (k + 2) * DT)
        apex = max(apex, s.position[1])
    closed_form = JUMP_SPEED ** 2 / (2 * G)
    assert abs(apex - closed_form) <= 2 * DT * JUMP_SPEED
    assert s.position[1] == 0.0 and s.ground_contact


def test_walk_speed_and_heading(flat_world):
    s = run(flat_world, spawn_state((0, 0, 0), heading=0.0), ActionCommand(forward=1.0), 50)
    # heading 0 faces +z; one second at 6 m/s
    assert s.position[2] == pytest.approx(6.0)
    assert s.position[0] == pytest.approx(0.0, abs=1e-12)
    s = run(flat_world, spawn_state((0, 0, 0)), ActionCommand(turn=1.0), 25)
    assert s.heading == pytest.approx(math.pi / 2)


def test_diagonal_input_is_capped(flat_world):
    s = run(flat_world, spawn_state((0, 0, 0)), ActionCommand(forward=1.0, strafe=1.0), 50)
    assert math.hypot(s.position[0], s.position[2]) == pytest.approx(6.0)


def test_wall_blocks_and_disabled_wall_passes():
    wall = {"box": box((-5, 0, 3), (5, 4, 4))}
    solid = make_scenario([ground(), wall])
    ghost = make_scenario([ground(), {**wall, "collision_enabled": False}])
    go = ActionCommand(forward=1.0)
    s = run(solid, spawn_state((0, 0, 0)), go, 100)
    assert s.position[2] == pytest.approx(3.0 - 0.2)
    assert not overlaps_enabled_block(solid, s.position)
    s = run(ghost, spawn_state((0, 0, 0)), go, 100)
    assert s.position[2] == pytest.approx(12.0)


def test_climb_only_while_pushing():
    wall = {"box": box((-5, 0, 3), (5, 6, 40)), "surface_class": "climbable"}
    scn = make_scenario([ground(), wall])
    s = run(scn, spawn_state((0, 0, 0)), ActionCommand(forward=1.0), 60)
    assert s.is_climbing
    assert s.position[1] > 1.5
    # over the top edge and onto the slab
    s = run(scn, s, ActionCommand(forward=1.0), 200)
    assert s.position[1] == pytest.approx(6.0)
    assert s.ground_contact and not s.is_climbing
    assert s.position[2] > 4.0

    plain = make_scenario([ground(), {**wall, "surface_class": "solid"}])
    s = run(plain, spawn_state((0, 0, 0)), ActionCommand(forward=1.0), 60)
    assert s.position[1] == 0.0 and not s.is_climbing


def test_climber_slides_down_when_not_pushing():
    wall = {"box": box((-5, 0, 3), (5, 20, 4)), "surface_class": "climbable"}
    scn = make_scenario([ground(), wall])
    s = run(scn, spawn_state((0, 0, 0)), ActionCommand(forward=1.0), 150)
    high = s.position[1]
    s2 = step(scn, s, ActionCommand(), 0.0)
    assert s2.position[1] == pytest.approx(high - 3.0 * DT)
    assert s2.is_climbing


def test_stuck_trap_freezes_for_good():
    trap = {"box": box((-5, 0, 3), (5, 0.1, 8)), "surface_class": "stuck_trap"}
    scn = make_scenario([ground(), trap])
    s = run(scn, spawn_state((0, 0, 0)), ActionCommand(forward=1.0), 100)
    assert s.frozen
    assert s.velocity == (0.0, 0.0, 0.0)
    later = run(scn, s, ActionCommand(forward=1.0, jump=1), 50)
    assert later.position == s.position and later.velocity == (0.0, 0.0, 0.0)


def _elevator_world():
    elev = {"platform": box((-2, -0.3, 8), (2, 0, 12)), "waypoints": [[0, 0, 10], [0, 6, 10]], "speed": 2}
    return make_scenario([ground()], elevators=[elev])


def test_elevator_carries_standing_character():
    scn = _elevator_world()
    s = spawn_state((0, 0, 10))
    t = 0.0
    top = 0.0
    for _ in range(150):
        s = step(scn, s, ActionCommand(), t)
        t += DT
        top = max(top, s.position[1])
    # up 6 m at 2 m/s, then back down
    assert top == pytest.approx(6.0, abs=1e-9)
    assert s.position[0] == 0.0 and s.position[2] == 10.0
    assert s.ground_contact


def test_elevator_periodicity():
    elev = _elevator_world().elevators[0]
    for t in (0.0, 0.7, 2.5, 13.3, 1e3 + 0.01):
        a, b = elev.anchor_at(t), elev.anchor_at(t + elev.period)
        assert max(abs(x - y) for x, y in zip(a, b)) <= 1e-9


def test_non_finite_inputs_rejected(flat_world):
    with pytest.raises(ValueError):
        step(flat_world, spawn_state((math.nan, 0, 0)), ActionCommand(), 0.0)
    with pytest.raises(ValueError):
        ActionCommand(forward=2.0)
    with pytest.raises(ValueError):
        ActionCommand(jump=3)


# --- rays -----------------------------------------------------------------------

def test_raycast_empty_space():
    scn = make_scenario([])
    assert raycast(scn, (0, 1, 0), (0, 0, 1), 20.0) == (20.0, None)


def test_raycast_wall_three_meters_ahead():
    scn = make_scenario([ground(), {"box": box((-5, 0, 3), (5, 4, 4))}])
    d, cls = raycast(scn, (0, 1, 0), (0, 0, 1), 20.0)
    assert abs(d - 3.0) <= 1e-6 and cls is SurfaceClass.SOLID


def test_raycast_ignores_disabled_segment():
    scn = make_scenario([
        ground(),
        {"box": box((-5, 0, 3), (5, 4, 4)), "collision_enabled": False},
        {"box": box((-5, 0, 10), (5, 4, 11)), "surface_class": "climbable"},
        {"box": box((-5, 0, 11), (5, 4, 12))},
    ])
    d, cls = raycast(scn, (0, 1, 0), (0, 0, 1), 20.0)
    assert d == pytest.approx(10.0) and cls is SurfaceClass.CLIMBABLE


def test_raycast_sees_platforms():
    scn = _elevator_world()
    # one second in, the platform top is 2 m up
    d, cls = raycast(scn, (0, 3, 10), (0, -1, 0), 20.0, t=1.0)
    assert d == pytest.approx(1.0) and cls is SurfaceClass.ELEVATOR_PLATFORM


def test_raycast_contract():
    scn = make_scenario()
    with pytest.raises(ValueError):
        raycast(scn, (0, 1, 0), (0, 0, 2), 20.0)
    with pytest.raises(ValueError):
        raycast(scn, (0, 1, 0), (0, 0, 1), 0.0)


def face_plane_oracle(origin, direction, lo, hi, max_len):
    """Entry distance by intersecting the six face planes; 0 when starting inside."""
    if all(lo[i] <= origin[i] <= hi[i] for i in range(3)):
        return 0.0
    best = None
    for axis in range(3):
        if direction[axis] == 0.0:
            continue
        for plane in (lo[axis], hi[axis]):
            t = (plane - origin[axis]) / direction[axis]
            if t < 0 or t > max_len:
                continue
            hit = [origin[i] + t * direction[i] for i in range(3)]
            others = [i for i in range(3) if i != axis]
            if all(lo[i] - 1e-9 <= hit[i] <= hi[i] + 1e-9 for i in others):
                if best is None or t < best:
                    best = t
    return best


def test_raycast_matches_face_plane_oracle_on_random_scenes():
    import random

    rng = random.Random(1234)
    for _ in range(1000):
        blocks = []
        boxes = []
        for _ in range(rng.randint(1, 6)):
            lo = [rng.uniform(-15, 15) for _ in range(3)]
            hi = [c + rng.uniform(0.2, 6) for c in lo]
            boxes.append((lo, hi))
            blocks.append({"box": box(lo, hi)})
        scn = make_scenario(blocks)
        o = [rng.uniform(-20, 20) for _ in range(3)]
        v = [rng.gauss(0, 1) for _ in range(3)]
        n = math.sqrt(sum(c * c for c in v))
        d = [c / n for c in v]
        hits = [h for lo, hi in boxes if (h := face_plane_oracle(o, d, lo, hi, 20.0)) is not None]
        want = min(hits) if hits else 20.0
        got, cls = raycast(scn, tuple(o), tuple(d), 20.0)
        assert abs(got - want) <= 1e-6
        assert (cls is None) == (not hits)


# --- properties -----------------------------------------------------------------

actions = st.builds(
    ActionCommand,
    forward=st.sampled_from([-1.0, 0.0, 1.0]),
    turn=st.sampled_from([-1.0, 0.0, 1.0]),
    strafe=st.sampled_from([-1.0, 0.0, 1.0]),
    jump=st.integers(0, 1),
)

MESA = load_scenario("mesa")


@settings(max_examples=40, deadline=None)
@given(
    start=st.tuples(st.floats(2, 98), st.floats(2, 98)),
    heading=st.floats(0, 2 * math.pi, exclude_max=True),
    seq=st.lists(st.tuples(actions, st.integers(1, 60)), min_size=1, max_size=8),
    t0=st.floats(0, 100),
)
def test_never_penetrates_enabled_blocks(start, heading, seq, t0):
    s = spawn_state((start[0], 20.0, start[1]), heading)
    if overlaps_enabled_block(MESA, s.position):
        return
    t = t0
    for a, n in seq:
        for _ in range(n):
            s = step(MESA, s, a, t)
            t += DT
            assert not overlaps_enabled_block(MESA, s.position)
            assert 0.0 <= s.jump_cooldown <= JUMP_COOLDOWN_MAX
            if s.frozen:
                assert s.velocity == (0.0, 0.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(
    pos=st.tuples(st.floats(0, 100), st.floats(0, 15), st.floats(0, 100)),
    vel=st.tuples(st.floats(-6, 6), st.floats(-10, 10), st.floats(-6, 6)),
    heading=st.floats(0, 6.28),
    a=actions,
    t=st.floats(0, 500),
)
def test_step_is_deterministic(pos, vel, heading, a, t):
    s = CharacterState(pos, vel, heading)
    assert step(MESA, s, a, t) == step(MESA, s, a, t)


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-50, 50), z=st.floats(-50, 50), heading=st.floats(0, 6.28))
def test_rest_is_a_fixed_point(x, z, heading):
    scn = make_scenario()
    s = step(scn, spawn_state((x, 0.0, z), heading), ActionCommand(), 0.0)
    assert s.ground_contact
    assert step(scn, s, ActionCommand(), DT).position == s.position


def test_character_height_constant():
    assert CHAR_HEIGHT == 1.7
