"""Reachable-surface flood fill and the coverage estimate derived from it.

Standing spots are sampled on a horizontal grid over the exploration
boundary. A breadth-first fill from the initial spawn links neighbouring
spots that the character can walk, drop, jump, climb or ride between. The
estimated number of buffer points is the mean size of a maximal
τ-separated subset of the reachable spots under random insertion orders.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from .buffer import TAU
from .graph import cluster_points
from .world import CHAR_HALF_WIDTH, CHAR_HEIGHT, JUMP_SPEED, WALK_SPEED, G, Scenario, SurfaceClass

GRID_STEP = 0.5
JUMP_CLEAR = 1.3
ELEVATOR_SAMPLE = 0.5


@dataclass
class ReachResult:
    positions: np.ndarray  # (n, 3) reachable standing spots, BFS order
    terminal: np.ndarray  # bool per spot: standing on a stuck trap
    estimated_max: int
    net_sizes: list[int]
    regions: int

    def __len__(self) -> int:
        return len(self.positions)


def _columns(scn: Scenario, step: float):
    eb = scn.exploration_boundary
    xs = np.arange(eb.min[0] + step / 2, eb.max[0], step)
    zs = np.arange(eb.min[2] + step / 2, eb.max[2], step)
    return xs, zs


def _free(boxes: list, x: float, y_lo: float, y_hi: float, z: float) -> bool:
    hw = CHAR_HALF_WIDTH
    for b in boxes:
        if (x + hw > b[0] and x - hw < b[3] and z + hw > b[2] and z - hw < b[5]
                and y_hi > b[1] and y_lo < b[4]):
            return False
    return True


def jump_reach(rise: float) -> float:
    """Horizontal distance covered by a running jump before it descends through ``rise``."""
    disc = JUMP_SPEED * JUMP_SPEED - 2.0 * G * rise
    if disc < 0.0:
        return 0.0
    return WALK_SPEED * (JUMP_SPEED + math.sqrt(disc)) / G


def flood_fill(scn: Scenario, step: float = GRID_STEP, jump_clear: float = JUMP_CLEAR,
               allow_climb: bool = True, allow_elevators: bool = True,
               gap_jumps: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Reachable standing spots (x, y, z) and their trap flags, in BFS order."""
    xs, zs = _columns(scn, step)
    nx, nz = len(xs), len(zs)
    eb = scn.exploration_boundary
    static = [(*b.box.as_tuple(), b.surface_class) for b in scn.blocks if b.collision_enabled]
    hw = CHAR_HALF_WIDTH
    col_static: dict[tuple[int, int], list] = {}

    def near(i: int, k: int) -> list:
        lst = col_static.get((i, k))
        if lst is None:
            x, z = xs[i], zs[k]
            lst = [b for b in static if x + hw > b[0] and x - hw < b[3] and z + hw > b[2] and z - hw < b[5]]
            col_static[(i, k)] = lst
        return lst

    # surfaces[(i, k)] -> list of (y, kind, elevator sample id or -1)
    surfaces: dict[tuple[int, int], list[tuple[float, SurfaceClass, int]]] = {}
    climb_tops: dict[tuple[int, int], list[tuple[float, float]]] = {}

    def column_range(b, pad: float = 0.0):
        i0 = max(0, int(math.ceil((b[0] - pad - xs[0]) / step - 1e-9))) if nx else 0
        i1 = min(nx - 1, int(math.floor((b[3] + pad - xs[0]) / step + 1e-9)))
        k0 = max(0, int(math.ceil((b[2] - pad - zs[0]) / step - 1e-9))) if nz else 0
        k1 = min(nz - 1, int(math.floor((b[5] + pad - zs[0]) / step + 1e-9)))
        return i0, i1, k0, k1

    for b in static:
        i0, i1, k0, k1 = column_range(b)
        top = b[4]
        for i in range(i0, i1 + 1):
            for k in range(k0, k1 + 1):
                if _free(near(i, k), xs[i], top, top + CHAR_HEIGHT, zs[k]) and eb.min[1] <= top <= eb.max[1]:
                    surfaces.setdefault((i, k), []).append((top, b[6], -1))
                if b[6] is SurfaceClass.CLIMBABLE:
                    climb_tops.setdefault((i, k), []).append((b[1], top))

    # elevator platform tops sampled along each loop; samples of one elevator share a ride group
    ride_groups: list[list[tuple[int, int, int]]] = []
    sample_id = 0
    if allow_elevators:
        for e in scn.elevators:
            group = []
            n = max(2, int(math.ceil(e.loop_length / ELEVATOR_SAMPLE)))
            for s in range(n):
                t = (s / n) * e.period
                box = e.box_at(t).as_tuple()
                top = box[4]
                i0, i1, k0, k1 = column_range(box)
                for i in range(i0, i1 + 1):
                    for k in range(k0, k1 + 1):
                        if _free(near(i, k), xs[i], top, top + CHAR_HEIGHT, zs[k]) and eb.min[1] <= top <= eb.max[1]:
                            surfaces.setdefault((i, k), []).append((top, SurfaceClass.ELEVATOR_PLATFORM, sample_id))
                            group.append((i, k, sample_id))
                sample_id += 1
            ride_groups.append(group)

    node_id: dict[tuple[int, int, float, int], int] = {}
    nodes: list[tuple[int, int, float, SurfaceClass, int]] = []
    for (i, k), lst in surfaces.items():
        for y, kind, sid in lst:
            key = (i, k, y, sid)
            if key not in node_id:
                node_id[key] = len(nodes)
                nodes.append((i, k, y, kind, sid))
    by_column: dict[tuple[int, int], list[int]] = {}
    for n_, (i, k, y, kind, sid) in enumerate(nodes):
        by_column.setdefault((i, k), []).append(n_)
    ride_of: dict[int, int] = {}
    ride_nodes: list[list[int]] = []
    for g, group in enumerate(ride_groups):
        members = []
        for i, k, sid in group:
            for n_ in by_column.get((i, k), []):
                if nodes[n_][4] == sid:
                    members.append(n_)
                    ride_of[n_] = g
        ride_nodes.append(sorted(set(members)))

    # start: highest surface at or below the spawn in its column
    sx, sy, sz = scn.initial_spawn
    si = min(nx - 1, max(0, int((sx - xs[0]) / step + 0.5)))
    sk = min(nz - 1, max(0, int((sz - zs[0]) / step + 0.5)))
    starts = [n_ for n_ in by_column.get((si, sk), []) if nodes[n_][2] <= sy + 1e-6 and nodes[n_][4] < 0]
    if not starts:
        return np.zeros((0, 3)), np.zeros(0, dtype=bool)
    start = max(starts, key=lambda n_: nodes[n_][2])

    max_cells = int(jump_reach(0.0) / step)

    def _gap_jumps(cur: int) -> list[int]:
        """Running jumps across gaps along the four axis directions."""
        i, k, y1, _, _ = nodes[cur]
        out = []
        for di, dk in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            first = by_column.get((i + di, k + dk), [])
            # only from a ledge: the next column offers nothing but a drop
            if any(nodes[n_][2] >= y1 - 0.25 for n_ in first):
                continue
            floor = max(nodes[n_][2] for n_ in first) if first else -math.inf
            for d in range(2, max_cells + 1):
                ci, ck = i + di * d, k + dk * d
                if not (0 <= ci < nx and 0 <= ck < nz):
                    break
                if not _free(near(ci, ck), xs[ci], y1 + jump_clear, y1 + jump_clear + CHAR_HEIGHT, zs[ck]):
                    break
                col = [n_ for n_ in by_column.get((ci, ck), []) if nodes[n_][4] < 0]
                # a landing has to stand clear of the gap floor, otherwise it is just a drop
                hits = [n_ for n_ in col
                        if floor + 0.25 < nodes[n_][2] <= y1 + jump_clear
                        and nodes[n_][2] >= y1 - jump_clear
                        and d * step <= jump_reach(max(0.0, nodes[n_][2] - y1))]
                if hits:
                    out.append(max(hits, key=lambda n_: nodes[n_][2]))
                    break
                below = [nodes[n_][2] for n_ in col if nodes[n_][2] < y1 - 0.25]
                if below:
                    floor = max(floor, max(below))
        return out

    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        i, k, y1, kind, sid = nodes[cur]
        if kind is SurfaceClass.STUCK_TRAP:
            continue
        nbrs: list[int] = []
        if cur in ride_of:
            nbrs.extend(ride_nodes[ride_of[cur]])
        for di, dk in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            c = (i + di, k + dk)
            cand = by_column.get(c)
            x2, z2 = (xs[c[0]], zs[c[1]]) if 0 <= c[0] < nx and 0 <= c[1] < nz else (None, None)
            if x2 is None:
                continue
            if cand:
                # highest surface we can walk/jump/drop onto without a wall in between
                best = None
                for n_ in cand:
                    y2 = nodes[n_][2]
                    if y2 > y1 + jump_clear:
                        continue
                    if nodes[n_][4] >= 0 and sid >= 0 and nodes[n_][4] != sid:
                        continue
                    lo = y2
                    hi = max(y1, y2) + CHAR_HEIGHT
                    if not _free(near(*c), x2, lo + 1e-9, hi, z2):
                        continue
                    if best is None or y2 > nodes[best][2]:
                        best = n_
                if best is not None:
                    nbrs.append(best)
                if allow_climb:
                    for bot, top in climb_tops.get(c, []):
                        if bot <= y1 + CHAR_HEIGHT and top > y1 + jump_clear:
                            for n_ in cand:
                                if abs(nodes[n_][2] - top) < 1e-9:
                                    nbrs.append(n_)
        if gap_jumps and kind is not SurfaceClass.ELEVATOR_PLATFORM:
            nbrs.extend(_gap_jumps(cur))
        for n_ in nbrs:
            if n_ not in seen:
                seen.add(n_)
                order.append(n_)
                queue.append(n_)

    pos = np.array([(xs[nodes[n_][0]], nodes[n_][2], zs[nodes[n_][1]]) for n_ in order], dtype=float)
    trap = np.array([nodes[n_][3] is SurfaceClass.STUCK_TRAP for n_ in order], dtype=bool)
    return pos, trap


def greedy_net(points: np.ndarray, tau: float = TAU, order=None) -> np.ndarray:
    """Indices of a maximal subset with pairwise distances > tau, built greedily."""
    if order is None:
        order = range(len(points))
    inv = 1.0 / tau
    grid: dict[tuple[int, int, int], list[int]] = {}
    kept: list[int] = []
    for j in order:
        p = points[j]
        c = (int(math.floor(p[0] * inv)), int(math.floor(p[1] * inv)), int(math.floor(p[2] * inv)))
        ok = True
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for q in grid.get((c[0] + dx, c[1] + dy, c[2] + dz), ()):
                        d = points[q] - p
                        if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= tau * tau:
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            kept.append(j)
            grid.setdefault(c, []).append(j)
    return np.array(kept, dtype=int)


def count_regions(points: np.ndarray, radius: float, min_size: int = 1) -> int:
    return cluster_points(np.asarray(points, dtype=float).reshape(-1, 3), radius, min_size).n_clusters


def estimate(scn: Scenario, tau: float = TAU, orders: int = 16, seed: int = 0, **fill_kwargs) -> ReachResult:
    pos, trap = flood_fill(scn, **fill_kwargs)
    rng = random.Random(seed)
    sizes = []
    net = None
    for _ in range(orders):
        perm = list(range(len(pos)))
        rng.shuffle(perm)
        net = greedy_net(pos, tau, perm)
        sizes.append(len(net))
    est = max(1, int(round(sum(sizes) / len(sizes)))) if sizes else 1
    regions = count_regions(pos[net], 2.0 * tau, 5) if net is not None and len(net) else 0
    return ReachResult(pos, trap, est, sizes, regions)


def spot_coverage(reach: ReachResult, points, tau: float = TAU) -> float:
    """Fraction of reachable spots lying within ``tau`` of some visited point.

    Unlike ``len(points) / estimated_max`` this cannot exceed 1 when airborne
    points pack denser than the standing-spot net.
    """
    if not len(reach.positions):
        return 0.0
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if not len(pts):
        return 0.0
    d, _ = cKDTree(pts).query(reach.positions, k=1, distance_upper_bound=tau + 1e-9)
    return float(np.mean(d <= tau))
