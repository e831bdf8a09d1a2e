"""Boundary crossing detection, novelty-filtered trajectory recording and
stuck-spot outlier analysis."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .buffer import TAU, VisitBuffer
from .world.scenario import Box, Scenario, Vec3

EB_ID = "EB"
EXIT, ENTER = "exit", "enter"
NOVELTY_SEP = 2.0 * TAU
MAX_RECORDED_PER_BOUNDARY = 100
STUCK_FLOOR = 5
STUCK_SIGMAS = 3.0
MIN_EPISODES = 10


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryEvent:
    boundary: str
    point: Vec3
    direction: str
    episode: int = 0
    step: int = 0


@dataclass
class RecordedTrajectory:
    episode: int
    samples: list[tuple[int, Vec3]]
    event: BoundaryEvent


def boundaries_of(scenario: Scenario) -> list[tuple[str, Box]]:
    return [(EB_ID, scenario.exploration_boundary)] + [(r.name, r.box) for r in scenario.rois]


def _segment_clip(box: Box, a: Sequence[float], b: Sequence[float]) -> tuple[float, float] | None:
    """Parameter interval of segment a->b inside ``box`` (Liang-Barsky)."""
    t0, t1 = 0.0, 1.0
    for i in range(3):
        d = b[i] - a[i]
        lo, hi = box.min[i], box.max[i]
        if d == 0.0:
            if a[i] < lo or a[i] > hi:
                return None
            continue
        ta = (lo - a[i]) / d
        tb = (hi - a[i]) / d
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return None
    return t0, t1


def _lerp(a: Sequence[float], b: Sequence[float], u: float) -> Vec3:
    return (a[0] + (b[0] - a[0]) * u, a[1] + (b[1] - a[1]) * u, a[2] + (b[2] - a[2]) * u)


def crossing_point(box: Box, prev: Sequence[float], curr: Sequence[float], direction: str) -> Vec3:
    """Where segment prev->curr passes the surface of ``box``."""
    span = _segment_clip(box, prev, curr)
    if span is None:  # both endpoints touch the surface only through rounding
        return tuple(curr)  # type: ignore[return-value]
    u = span[1] if direction == EXIT else span[0]
    return _lerp(prev, curr, u)


def check_crossing(
    boundaries: Iterable[tuple[str, Box]],
    prev: Sequence[float],
    curr: Sequence[float],
    episode: int = 0,
    step: int = 0,
) -> list[BoundaryEvent]:
    events = []
    for name, box in boundaries:
        was_in = box.contains(prev)
        now_in = box.contains(curr)
        if was_in and not now_in:
            events.append(BoundaryEvent(name, crossing_point(box, prev, curr, EXIT), EXIT, episode, step))
        elif now_in and not was_in:
            events.append(BoundaryEvent(name, crossing_point(box, prev, curr, ENTER), ENTER, episode, step))
    return events


def novelty_filter(event: BoundaryEvent, recorded: Iterable[Vec3], sep: float = NOVELTY_SEP) -> bool:
    """Accept iff the crossing point is farther than ``sep`` from every prior one."""
    return all(math.dist(event.point, q) > sep for q in recorded)


@dataclass
class TrajectoryRecorder:
    """Single-writer store of accepted crossing trajectories."""

    sep: float = NOVELTY_SEP
    cap: int = MAX_RECORDED_PER_BOUNDARY
    recorded: list[RecordedTrajectory] = field(default_factory=list)
    _points: dict[tuple[str, str], list[Vec3]] = field(default_factory=dict)
    rejected: int = 0

    def offer(self, event: BoundaryEvent, samples: list[tuple[int, Vec3]]) -> bool:
        key = (event.boundary, event.direction)
        prior = self._points.setdefault(key, [])
        if len(prior) >= self.cap or not novelty_filter(event, prior, self.sep):
            self.rejected += 1
            return False
        prior.append(event.point)
        self.recorded.append(RecordedTrajectory(event.episode, list(samples), event))
        return True

    def for_boundary(self, boundary: str, direction: str | None = None) -> list[RecordedTrajectory]:
        return [
            r for r in self.recorded
            if r.event.boundary == boundary and (direction is None or r.event.direction == direction)
        ]

    def write(self, directory: str | Path) -> list[Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for n, rec in enumerate(self.recorded):
            path = out / f"traj_{n:04d}_{rec.event.boundary}_{rec.event.direction}.txt"
            write_trajectory(path, rec)
            paths.append(path)
        return paths


def write_trajectory(path: str | Path, rec: RecordedTrajectory) -> None:
    ev = rec.event
    cx, cy, cz = ev.point
    lines = [
        f"# boundary {ev.boundary}",
        f"# direction {ev.direction}",
        f"# episode {rec.episode}",
        f"# step {ev.step}",
        f"# crossing {cx!r} {cy!r} {cz!r}",
    ]
    lines += [f"{s} {p[0]!r} {p[1]!r} {p[2]!r}" for s, p in rec.samples]
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path: str | Path) -> RecordedTrajectory:
    header: dict[str, str] = {}
    samples = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" ")
            header[key] = value
        elif line.strip():
            s, x, y, z = line.split()
            samples.append((int(s), (float(x), float(y), float(z))))
    cx, cy, cz = (float(v) for v in header["crossing"].split())
    ev = BoundaryEvent(header["boundary"], (cx, cy, cz), header["direction"],
                       int(header["episode"]), int(header["step"]))
    return RecordedTrajectory(ev.episode, samples, ev)


# --- stuck spots ------------------------------------------------------------

@dataclass
class OutlierReport:
    flagged: list[tuple[int, int, float]]
    mean: float
    std: float
    quartiles: tuple[float, float, float]
    threshold: float

    def indices(self) -> list[int]:
        return [i for i, _, _ in self.flagged]

    def write(self, path: str | Path, buffer: VisitBuffer) -> None:
        lines = [
            f"# mean {self.mean!r} std {self.std!r} threshold {self.threshold!r}",
            f"# quartiles {self.quartiles[0]!r} {self.quartiles[1]!r} {self.quartiles[2]!r}",
            "index,x,y,z,termination_count,score",
        ]
        for i, count, score in self.flagged:
            x, y, z = buffer.points[i]
            lines.append(f"{i},{x!r},{y!r},{z!r},{count},{score!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def detect_stuck(buffer: VisitBuffer, min_episodes: int = MIN_EPISODES) -> OutlierReport:
    """Flag points whose termination count is >= max(5, mean + 3 std)."""
    if not len(buffer) or buffer.total_terminations < min_episodes:
        raise InsufficientData("insufficient data")
    counts = buffer.termination_counters
    mu = statistics.fmean(counts)
    sigma = statistics.pstdev(counts, mu)
    threshold = max(float(STUCK_FLOOR), mu + STUCK_SIGMAS * sigma)
    if len(counts) >= 2:
        q = statistics.quantiles(counts, n=4, method="inclusive")
        quart = (q[0], q[1], q[2])
    else:
        quart = (float(counts[0]),) * 3
    flagged = [
        (i, c, (c - mu) / sigma if sigma > 0 else math.inf)
        for i, c in enumerate(counts)
        if c >= threshold
    ]
    flagged.sort(key=lambda f: (-f[1], f[0]))
    return OutlierReport(flagged, mu, sigma, quart, threshold)
