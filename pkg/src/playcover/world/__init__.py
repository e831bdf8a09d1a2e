from .physics import (
    CHAR_HALF_WIDTH,
    CHAR_HEIGHT,
    CLIMB_SPEED,
    DT,
    G,
    JUMP_COOLDOWN_MAX,
    JUMP_SPEED,
    TURN_RATE,
    WALK_SPEED,
    ActionCommand,
    CharacterState,
    advance,
    character_box,
    compiled,
    forward_vector,
    overlaps_enabled_block,
    ray_box,
    raycast,
    spawn_state,
    step,
)
from .scenario import (
    Block,
    Box,
    Elevator,
    Roi,
    Scenario,
    ScenarioError,
    SurfaceClass,
    bundled_scenario_path,
    dump_scenario,
    load_scenario,
    parse_scenario,
    scenario_from_dict,
)
