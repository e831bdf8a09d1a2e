"""Buffer of visited states with count-based novelty reward.

Positions are discretized greedily: a position becomes a new stored point
only when it is farther than ``tau`` from every stored point; otherwise the
nearest stored point's visit counter is incremented.
"""

from __future__ import annotations

import math
import random
from pathlib import Path
from typing import Iterable, Sequence

from .world.scenario import Vec3

TAU = 5.0
R_MAX = 0.5
MAX_COUNTER = 500

EXPORT_HEADER = "x,y,z,visit_count,ground_flag,termination_count"

_NEIGHBOURS = tuple(
    (dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)
)


def reward(n: int, r_max: float = R_MAX, max_counter: int = MAX_COUNTER) -> float:
    """Novelty reward for a point visited ``n`` times, annealed to zero."""
    if n < 1:
        raise ValueError(f"visit count must be >= 1, got {n}")
    r = r_max * (1.0 - n / max_counter)
    return r if r > 0.0 else 0.0


class VisitBuffer:
    """τ-separated point set with visit, ground and termination bookkeeping.

    A uniform grid hash with cell edge ``tau`` backs the lookups; any point
    within ``tau`` of a query lies in the 27 cells around it.
    """

    def __init__(self, tau: float = TAU, r_max: float = R_MAX, max_counter: int = MAX_COUNTER):
        if tau <= 0.0:
            raise ValueError("tau must be positive")
        self.tau = tau
        self.r_max = r_max
        self.max_counter = max_counter
        self.points: list[Vec3] = []
        self.counters: list[int] = []
        self.ground_flags: list[bool] = []
        self.termination_counters: list[int] = []
        self.total_observations = 0
        self.total_terminations = 0
        self._inv = 1.0 / tau
        self._grid: dict[tuple[int, int, int], list[int]] = {}
        self._cell_lo = [0, 0, 0]
        self._cell_hi = [0, 0, 0]

    def __len__(self) -> int:
        return len(self.points)

    # -- spatial index ---------------------------------------------------------

    def _cell(self, p: Sequence[float]) -> tuple[int, int, int]:
        inv = self._inv
        return (math.floor(p[0] * inv), math.floor(p[1] * inv), math.floor(p[2] * inv))

    def _insert(self, p: Vec3, grounded: bool) -> int:
        idx = len(self.points)
        self.points.append(p)
        self.counters.append(1)
        self.ground_flags.append(bool(grounded))
        self.termination_counters.append(0)
        c = self._cell(p)
        bucket = self._grid.get(c)
        if bucket is None:
            self._grid[c] = [idx]
        else:
            bucket.append(idx)
        if idx == 0:
            self._cell_lo = list(c)
            self._cell_hi = list(c)
        else:
            for k in range(3):
                if c[k] < self._cell_lo[k]:
                    self._cell_lo[k] = c[k]
                if c[k] > self._cell_hi[k]:
                    self._cell_hi[k] = c[k]
        return idx

    def nearest_within_tau(self, p: Sequence[float]) -> tuple[int, float]:
        """Nearest stored point at distance <= tau, or ``(-1, inf)``."""
        cx, cy, cz = self._cell(p)
        grid = self._grid
        pts = self.points
        best = -1
        best_d = math.inf
        dist = math.dist
        for dx, dy, dz in _NEIGHBOURS:
            bucket = grid.get((cx + dx, cy + dy, cz + dz))
            if bucket is None:
                continue
            for i in bucket:
                d = dist(p, pts[i])
                if d < best_d or (d == best_d and i < best):
                    best_d = d
                    best = i
        if best_d > self.tau:
            return -1, math.inf
        return best, best_d

    def nearest(self, p: Sequence[float]) -> tuple[int, float]:
        """Exact nearest stored point (lowest index on ties); ``(-1, inf)`` if empty."""
        if not self.points:
            return -1, math.inf
        cx, cy, cz = self._cell(p)
        lo, hi = self._cell_lo, self._cell_hi
        max_ring = max(
            abs(cx - lo[0]), abs(cx - hi[0]),
            abs(cy - lo[1]), abs(cy - hi[1]),
            abs(cz - lo[2]), abs(cz - hi[2]),
        )
        if max_ring > 8:
            return self.nearest_linear(p)
        grid = self._grid
        pts = self.points
        best = -1
        best_d = math.inf
        for r in range(max_ring + 1):
            for dx in range(-r, r + 1):
                for dy in range(-r, r + 1):
                    edge = abs(dx) == r or abs(dy) == r
                    for dz in ((range(-r, r + 1)) if edge else (-r, r)):
                        bucket = grid.get((cx + dx, cy + dy, cz + dz))
                        if bucket is None:
                            continue
                        for i in bucket:
                            d = math.dist(p, pts[i])
                            if d < best_d or (d == best_d and i < best):
                                best_d = d
                                best = i
            # cells in later rings are at least r*tau away
            if best >= 0 and best_d < r * self.tau:
                break
        return best, best_d

    def nearest_linear(self, p: Sequence[float]) -> tuple[int, float]:
        best = -1
        best_d = math.inf
        for i, q in enumerate(self.points):
            d = math.dist(p, q)
            if d < best_d:
                best_d = d
                best = i
        return best, best_d

    # -- operations ----------------------------------------------------------

    def observe(self, p: Sequence[float], grounded: bool) -> tuple[int, bool, float]:
        """Register a visit at ``p``; returns (point index, is_new, reward)."""
        x, y, z = p
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            raise ValueError(f"non-finite position {p!r}")
        self.total_observations += 1
        idx, _ = self.nearest_within_tau(p)
        if idx < 0:
            idx = self._insert((float(x), float(y), float(z)), grounded)
            n = 1
            is_new = True
        else:
            n = self.counters[idx] + 1
            self.counters[idx] = n
            if grounded:
                self.ground_flags[idx] = True
            is_new = False
        r = self.r_max * (1.0 - n / self.max_counter)
        return idx, is_new, (r if r > 0.0 else 0.0)

    def reward(self, n: int) -> float:
        return reward(n, self.r_max, self.max_counter)

    def sample_spawn(self, rng: random.Random, fallback: Vec3) -> Vec3:
        """Draw a ground-flagged point with probability proportional to 1/N."""
        candidates = [i for i, g in enumerate(self.ground_flags) if g]
        if not candidates:
            return fallback
        weights = [1.0 / self.counters[i] for i in candidates]
        (i,) = rng.choices(candidates, weights=weights, k=1)
        return self.points[i]

    def spawn_probabilities(self) -> dict[int, float]:
        candidates = [i for i, g in enumerate(self.ground_flags) if g]
        total = sum(1.0 / self.counters[i] for i in candidates)
        return {i: (1.0 / self.counters[i]) / total for i in candidates}

    def record_termination(self, p: Sequence[float], grounded: bool = False) -> int:
        """Increment the termination counter of the point nearest to ``p``.

        A location farther than tau from every stored point is observed
        (inserted) first.
        """
        idx, _ = self.nearest_within_tau(p)
        if idx < 0:
            idx, _, _ = self.observe(p, grounded)
        self.termination_counters[idx] += 1
        self.total_terminations += 1
        return idx

    def coverage(self, estimated_max: int) -> float:
        return coverage(len(self.points), estimated_max)

    # -- snapshots and files ---------------------------------------------------

    def copy(self) -> VisitBuffer:
        other = VisitBuffer(self.tau, self.r_max, self.max_counter)
        other.points = list(self.points)
        other.counters = list(self.counters)
        other.ground_flags = list(self.ground_flags)
        other.termination_counters = list(self.termination_counters)
        other.total_observations = self.total_observations
        other.total_terminations = self.total_terminations
        other._grid = {k: list(v) for k, v in self._grid.items()}
        other._cell_lo = list(self._cell_lo)
        other._cell_hi = list(self._cell_hi)
        return other

    def rows(self) -> Iterable[tuple[float, float, float, int, int, int]]:
        for p, n, g, t in zip(self.points, self.counters, self.ground_flags, self.termination_counters):
            yield (p[0], p[1], p[2], n, int(g), t)

    def export(self, path: str | Path, extra_column: tuple[str, Sequence] | None = None) -> None:
        header = EXPORT_HEADER
        if extra_column is not None:
            header += "," + extra_column[0]
        lines = [header]
        for i, (x, y, z, n, g, t) in enumerate(self.rows()):
            line = f"{x!r},{y!r},{z!r},{n},{g},{t}"
            if extra_column is not None:
                line += f",{extra_column[1][i]}"
            lines.append(line)
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path, tau: float = TAU) -> VisitBuffer:
        text = Path(path).read_text().splitlines()
        if not text or not text[0].startswith(EXPORT_HEADER):
            raise ValueError(f"{path}: not a buffer export")
        buf = cls(tau)
        for lineno, line in enumerate(text[1:], start=2):
            if not line.strip():
                continue
            cols = line.split(",")
            try:
                p = (float(cols[0]), float(cols[1]), float(cols[2]))
                n, g, t = int(cols[3]), int(cols[4]), int(cols[5])
            except (ValueError, IndexError):
                raise ValueError(f"{path}:{lineno}: malformed row") from None
            idx = buf._insert(p, bool(g))
            buf.counters[idx] = n
            buf.termination_counters[idx] = t
            buf.total_observations += n
            buf.total_terminations += t
        return buf


def coverage(n_points: int, estimated_max: int) -> float:
    if estimated_max <= 0:
        raise ValueError("estimated_max must be positive")
    return min(1.0, max(0.0, n_points / estimated_max))
