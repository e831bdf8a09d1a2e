import math

import pytest

from playcover.world import scenario_from_dict


def box(lo, hi):
    return {"min": list(lo), "max": list(hi)}


def ground(size=100.0):
    return {"box": box((-size, -1, -size), (size, 0, size)), "surface_class": "solid"}


def make_scenario(blocks=None, *, spawn=(0, 0, 0), eb=None, bounds=None, elevators=(), rois=(), est=None, name="t"):
    bounds = bounds or box((-120, -20, -120), (120, 60, 120))
    doc = {
        "name": name,
        "bounds": bounds,
        "exploration_boundary": eb or bounds,
        "initial_spawn": list(spawn),
        "blocks": [ground()] if blocks is None else list(blocks),
        "elevators": list(elevators),
        "rois": list(rois),
    }
    if est is not None:
        doc["estimated_max_points"] = est
    return scenario_from_dict(doc)


@pytest.fixture
def flat_world():
    return make_scenario()


def heading_towards(dx, dz):
    """Yaw that faces the direction (dx, dz); heading 0 faces +z."""
    return math.atan2(dx, dz) % (2 * math.pi)


# one line per acceptance criterion, echoed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
