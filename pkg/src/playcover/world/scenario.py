"""Static world description and the scenario file loader.

Scenario files are YAML documents. Axes are y-up: ``x`` and ``z`` span the
ground plane, ``y`` is height. Boxes are written as ``{min: [x, y, z],
max: [x, y, z]}`` in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import yaml

Vec3 = tuple[float, float, float]


class ScenarioError(ValueError):
    """Raised when a scenario document is malformed or violates an invariant."""


class SurfaceClass(str, Enum):
    SOLID = "solid"
    CLIMBABLE = "climbable"
    STUCK_TRAP = "stuck_trap"
    # never authored in files; reported by rays hitting a platform
    ELEVATOR_PLATFORM = "elevator_platform"


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its min and max corners."""

    min: Vec3
    max: Vec3

    @property
    def extents(self) -> Vec3:
        return (self.max[0] - self.min[0], self.max[1] - self.min[1], self.max[2] - self.min[2])

    @property
    def center(self) -> Vec3:
        return tuple((a + b) * 0.5 for a, b in zip(self.min, self.max))  # type: ignore[return-value]

    @property
    def volume(self) -> float:
        ex, ey, ez = self.extents
        return ex * ey * ez

    def contains(self, p: Vec3) -> bool:
        return (
            self.min[0] <= p[0] <= self.max[0]
            and self.min[1] <= p[1] <= self.max[1]
            and self.min[2] <= p[2] <= self.max[2]
        )

    def contains_box(self, other: Box) -> bool:
        return all(self.min[i] <= other.min[i] and other.max[i] <= self.max[i] for i in range(3))

    def translated(self, d: Vec3) -> Box:
        return Box(
            (self.min[0] + d[0], self.min[1] + d[1], self.min[2] + d[2]),
            (self.max[0] + d[0], self.max[1] + d[1], self.max[2] + d[2]),
        )

    def as_tuple(self) -> tuple[float, float, float, float, float, float]:
        return (*self.min, *self.max)

    def to_dict(self) -> dict[str, list[float]]:
        return {"min": list(self.min), "max": list(self.max)}


@dataclass(frozen=True)
class Block:
    box: Box
    surface_class: SurfaceClass = SurfaceClass.SOLID
    collision_enabled: bool = True
    label: str = ""


@dataclass(frozen=True)
class Elevator:
    """A platform looping through its waypoints at constant speed.

    Waypoints are positions of the platform's top-center; the authored
    ``platform`` box is its placement at the first waypoint. ``phase`` is the
    distance (m) already travelled along the closed loop at ``t = 0``.
    """

    platform: Box
    waypoints: tuple[Vec3, ...]
    speed: float
    phase: float = 0.0
    _segments: tuple[tuple[Vec3, Vec3, float], ...] = field(
        init=False, repr=False, compare=False, default=()
    )

    def __post_init__(self) -> None:
        segs = []
        n = len(self.waypoints)
        for i in range(n):
            a = self.waypoints[i]
            b = self.waypoints[(i + 1) % n]
            segs.append((a, b, math.dist(a, b)))
        object.__setattr__(self, "_segments", tuple(segs))

    @property
    def loop_length(self) -> float:
        return sum(s[2] for s in self._segments)

    @property
    def period(self) -> float:
        return self.loop_length / self.speed

    def anchor_at(self, t: float) -> Vec3:
        """Top-center of the platform at simulation time ``t``."""
        length = self.loop_length
        s = math.fmod(self.phase + self.speed * t, length)
        if s < 0.0:
            s += length
        for a, b, seg in self._segments:
            if s <= seg and seg > 0.0:
                u = s / seg
                return (a[0] + (b[0] - a[0]) * u, a[1] + (b[1] - a[1]) * u, a[2] + (b[2] - a[2]) * u)
            s -= seg
        return self.waypoints[0]

    def box_at(self, t: float) -> Box:
        a = self.anchor_at(t)
        w = self.waypoints[0]
        return self.platform.translated((a[0] - w[0], a[1] - w[1], a[2] - w[2]))


@dataclass(frozen=True)
class Roi:
    name: str
    box: Box


@dataclass(frozen=True)
class Scenario:
    name: str
    bounds: Box
    blocks: tuple[Block, ...]
    elevators: tuple[Elevator, ...]
    initial_spawn: Vec3
    exploration_boundary: Box
    rois: tuple[Roi, ...] = ()
    estimated_max_points: int | None = None

    def block_count(self, surface: SurfaceClass | None = None, collision: bool | None = None) -> int:
        return sum(
            1
            for b in self.blocks
            if (surface is None or b.surface_class == surface)
            and (collision is None or b.collision_enabled == collision)
        )

    def roi(self, name: str) -> Roi:
        for r in self.rois:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "name": self.name,
            "bounds": self.bounds.to_dict(),
            "exploration_boundary": self.exploration_boundary.to_dict(),
            "initial_spawn": list(self.initial_spawn),
            "blocks": [],
            "elevators": [],
            "rois": [{"name": r.name, "box": r.box.to_dict()} for r in self.rois],
        }
        for b in self.blocks:
            entry: dict[str, Any] = {
                "box": b.box.to_dict(),
                "surface_class": b.surface_class.value,
                "collision_enabled": b.collision_enabled,
            }
            if b.label:
                entry["label"] = b.label
            doc["blocks"].append(entry)
        for e in self.elevators:
            doc["elevators"].append(
                {
                    "platform": e.platform.to_dict(),
                    "waypoints": [list(w) for w in e.waypoints],
                    "speed": e.speed,
                    "phase": e.phase,
                }
            )
        if self.estimated_max_points is not None:
            doc["estimated_max_points"] = self.estimated_max_points
        return doc


# --- loading -----------------------------------------------------------------

_SCENARIO_KEYS = {
    "name",
    "bounds",
    "blocks",
    "elevators",
    "initial_spawn",
    "exploration_boundary",
    "rois",
    "estimated_max_points",
}
_REQUIRED_KEYS = {"name", "bounds", "blocks", "initial_spawn", "exploration_boundary"}


def _check_keys(obj: Any, where: str, allowed: set[str], required: set[str]) -> dict:
    if not isinstance(obj, dict):
        raise ScenarioError(f"{where}: expected a mapping")
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ScenarioError(f"{where}: unknown field(s) {', '.join(unknown)}")
    missing = sorted(required - set(obj))
    if missing:
        raise ScenarioError(f"{where}: missing field(s) {', '.join(missing)}")
    return obj


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ScenarioError(f"{where}: must be finite")
    return v


def _vec3(value: Any, where: str) -> Vec3:
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ScenarioError(f"{where}: expected a list of 3 numbers")
    return (_number(value[0], where), _number(value[1], where), _number(value[2], where))


def _box(value: Any, where: str) -> Box:
    obj = _check_keys(value, where, {"min", "max"}, {"min", "max"})
    box = Box(_vec3(obj["min"], f"{where}.min"), _vec3(obj["max"], f"{where}.max"))
    if any(e <= 0.0 for e in box.extents):
        raise ScenarioError(f"{where}: extents must be positive in all three axes")
    return box


def _block(value: Any, where: str) -> Block:
    obj = _check_keys(
        value, where, {"box", "surface_class", "collision_enabled", "label"}, {"box"}
    )
    box = _box(obj["box"], f"{where}.box")
    raw = obj.get("surface_class", "solid")
    try:
        surface = SurfaceClass(raw)
    except ValueError:
        raise ScenarioError(f"{where}.surface_class: unknown class {raw!r}") from None
    if surface is SurfaceClass.ELEVATOR_PLATFORM:
        raise ScenarioError(f"{where}.surface_class: elevator_platform is reserved for elevators")
    collision = obj.get("collision_enabled", True)
    if not isinstance(collision, bool):
        raise ScenarioError(f"{where}.collision_enabled: expected true or false")
    if surface is SurfaceClass.STUCK_TRAP and not collision:
        raise ScenarioError(f"{where}.collision_enabled: stuck_trap blocks must have collision enabled")
    label = obj.get("label", "")
    if not isinstance(label, str):
        raise ScenarioError(f"{where}.label: expected text")
    return Block(box, surface, collision, label)


def _elevator(value: Any, where: str) -> Elevator:
    obj = _check_keys(
        value, where, {"platform", "waypoints", "speed", "phase"}, {"platform", "waypoints", "speed"}
    )
    platform = _box(obj["platform"], f"{where}.platform")
    raw_wps = obj["waypoints"]
    if not isinstance(raw_wps, list) or len(raw_wps) < 2:
        raise ScenarioError(f"{where}.waypoints: need at least 2 waypoints")
    wps = tuple(_vec3(w, f"{where}.waypoints[{i}]") for i, w in enumerate(raw_wps))
    speed = _number(obj["speed"], f"{where}.speed")
    if speed <= 0.0:
        raise ScenarioError(f"{where}.speed: must be positive")
    phase = _number(obj.get("phase", 0.0), f"{where}.phase")
    top = ((platform.min[0] + platform.max[0]) * 0.5, platform.max[1], (platform.min[2] + platform.max[2]) * 0.5)
    if math.dist(top, wps[0]) > 1e-6:
        raise ScenarioError(f"{where}.waypoints[0]: must equal the platform top-center {top}")
    elevator = Elevator(platform, wps, speed, phase)
    if elevator.loop_length <= 0.0:
        raise ScenarioError(f"{where}.waypoints: loop has zero length")
    return elevator


def scenario_from_dict(doc: Any) -> Scenario:
    obj = _check_keys(doc, "scenario", _SCENARIO_KEYS, _REQUIRED_KEYS)
    name = obj["name"]
    if not isinstance(name, str) or not name:
        raise ScenarioError("name: expected non-empty text")
    bounds = _box(obj["bounds"], "bounds")
    eb = _box(obj["exploration_boundary"], "exploration_boundary")
    spawn = _vec3(obj["initial_spawn"], "initial_spawn")

    raw_blocks = obj["blocks"]
    if not isinstance(raw_blocks, list):
        raise ScenarioError("blocks: expected a list")
    blocks = tuple(_block(b, f"blocks[{i}]") for i, b in enumerate(raw_blocks))

    raw_elev = obj.get("elevators") or []
    if not isinstance(raw_elev, list):
        raise ScenarioError("elevators: expected a list")
    elevators = tuple(_elevator(e, f"elevators[{i}]") for i, e in enumerate(raw_elev))

    raw_rois = obj.get("rois") or []
    if not isinstance(raw_rois, list):
        raise ScenarioError("rois: expected a list")
    rois = []
    seen: set[str] = set()
    for i, r in enumerate(raw_rois):
        ro = _check_keys(r, f"rois[{i}]", {"name", "box"}, {"name", "box"})
        if not isinstance(ro["name"], str) or not ro["name"]:
            raise ScenarioError(f"rois[{i}].name: expected non-empty text")
        if ro["name"] in seen or ro["name"] == "EB":
            raise ScenarioError(f"rois[{i}].name: duplicate or reserved name {ro['name']!r}")
        seen.add(ro["name"])
        rois.append(Roi(ro["name"], _box(ro["box"], f"rois[{i}].box")))

    est = obj.get("estimated_max_points")
    if est is not None and (isinstance(est, bool) or not isinstance(est, int) or est <= 0):
        raise ScenarioError("estimated_max_points: expected a positive integer")

    if not bounds.contains_box(eb):
        raise ScenarioError("exploration_boundary outside bounds")
    if not eb.contains(spawn):
        raise ScenarioError("initial_spawn outside exploration_boundary")
    for i, r in enumerate(rois):
        if not eb.contains_box(r.box):
            raise ScenarioError(f"rois[{i}] ({r.name}) outside exploration_boundary")

    return Scenario(name, bounds, blocks, elevators, spawn, eb, tuple(rois), est)


def parse_scenario(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"not a valid scenario document: {exc}") from None
    return scenario_from_dict(doc)


def load_scenario(source: str | Path) -> Scenario:
    """Load and validate a scenario from a path.

    Bare names of bundled fixtures (``"mesa.scn"`` or ``"mesa"``) resolve to the package
    copy when no such file exists relative to the working directory.
    """
    path = Path(source)
    if not path.exists():
        bundled = bundled_scenario_path(str(source))
        if bundled is None:
            raise ScenarioError(f"scenario file not found: {source}")
        path = bundled
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {source}: {exc}") from None
    return parse_scenario(text)


def bundled_scenario_path(name: str) -> Path | None:
    base = Path(__file__).resolve().parent.parent / "scenarios"
    for cand in (base / name, base / f"{name}.scn"):
        if cand.is_file():
            return cand
    return None


def dump_scenario(scn: Scenario) -> str:
    return yaml.safe_dump(scn.to_dict(), sort_keys=False)
