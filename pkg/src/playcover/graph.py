"""Connectivity graph over buffer points, path queries and region maps."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .buffer import TAU, VisitBuffer
from .world.scenario import Vec3

DEFAULT_LINK_RADIUS = 2.0 * TAU
DEFAULT_MIN_CLUSTER = 5
NOISE = -1
LEVEL_BAND = 1.0
UP, DOWN, LEVEL = "upwards", "downwards", "level"


@dataclass
class ConnectivityGraph:
    """Directed traversal counts between buffer points; edge cost is distance."""

    positions: list[Vec3]
    edges: dict[tuple[int, int], int] = field(default_factory=dict)
    # samples farther than tau from every point, mapped to the nearest anyway
    far_samples: int = 0
    _adj: dict[int, list[int]] | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.positions)

    def add(self, i: int, j: int, count: int = 1) -> None:
        if i == j:
            raise ValueError("self-edges are not allowed")
        n = len(self.positions)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"edge ({i}, {j}) outside 0..{n - 1}")
        if count < 1:
            raise ValueError("traversal count must be >= 1")
        self.edges[(i, j)] = self.edges.get((i, j), 0) + count
        self._adj = None

    def cost(self, i: int, j: int) -> float:
        return math.dist(self.positions[i], self.positions[j])

    def successors(self, i: int) -> list[int]:
        if self._adj is None:
            adj: dict[int, list[int]] = {}
            for a, b in sorted(self.edges):
                adj.setdefault(a, []).append(b)
            self._adj = adj
        return self._adj.get(i, [])

    def write_edges(self, path: str | Path) -> None:
        lines = [f"{i} {j} {c}" for (i, j), c in sorted(self.edges.items())]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))

    @classmethod
    def read_edges(cls, path: str | Path, buffer: VisitBuffer) -> ConnectivityGraph:
        g = cls(list(buffer.points))
        for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                i, j, c = (int(v) for v in line.split())
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'i j count'") from None
            g.add(i, j, c)
        return g

    def to_networkx(self):
        import networkx as nx

        g = nx.DiGraph()
        for n, (x, y, z) in enumerate(self.positions):
            g.add_node(n, x=float(x), y=float(y), z=float(z))
        for (i, j), c in sorted(self.edges.items()):
            g.add_edge(i, j, count=c, cost=self.cost(i, j))
        return g

    def write_graphml(self, path: str | Path) -> None:
        import networkx as nx

        nx.write_graphml(self.to_networkx(), str(path))


def build_graph(trajectories: Iterable[Sequence[Sequence[float]]], buffer: VisitBuffer) -> ConnectivityGraph:
    """Map samples to their nearest buffer point and count transitions i -> j, i != j."""
    g = ConnectivityGraph(list(buffer.points))
    if not len(buffer):
        return g
    tau = buffer.tau
    for traj in trajectories:
        prev = -1
        for p in traj:
            idx, d = buffer.nearest(p)
            if d > tau:
                g.far_samples += 1
            if prev >= 0 and idx != prev:
                g.edges[(prev, idx)] = g.edges.get((prev, idx), 0) + 1
            prev = idx
    g._adj = None
    return g


@dataclass
class PathResult:
    nodes: list[int]
    cost: float
    start: int
    goal: int

    @property
    def reachable(self) -> bool:
        return bool(self.nodes)


def shortest_path_between(graph: ConnectivityGraph, start: int, goal: int) -> PathResult:
    """Dijkstra over directed edges.

    Ties between equal-cost routes go to the lower-index predecessor, so the
    result does not depend on insertion order.
    """
    dist = {start: 0.0}
    pred: dict[int, int] = {}
    done: set[int] = set()
    heap = [(0.0, start)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == goal:
            break
        for v in graph.successors(u):
            if v in done:
                continue
            nd = d + graph.cost(u, v)
            old = dist.get(v)
            if old is None or nd < old or (nd == old and u < pred[v]):
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, v))
    if goal not in done:
        return PathResult([], math.inf, start, goal)
    nodes = [goal]
    while nodes[-1] != start:
        nodes.append(pred[nodes[-1]])
    nodes.reverse()
    return PathResult(nodes, dist[goal], start, goal)


def shortest_path(graph: ConnectivityGraph, buffer: VisitBuffer, start: Sequence[float], goal: Sequence[float],
                  max_snap: float | None = None) -> PathResult:
    """Snap both endpoints to their nearest buffer points and search between them.

    An empty ``nodes`` list means no directed path exists. With ``max_snap``
    set, an endpoint farther than that from every point is off the explored
    map and also yields an empty path.
    """
    if not len(buffer):
        raise ValueError("buffer is empty")
    s, ds = buffer.nearest(start)
    t, dt = buffer.nearest(goal)
    if max_snap is not None and (ds > max_snap or dt > max_snap):
        return PathResult([], math.inf, s, t)
    return shortest_path_between(graph, s, t)


# --- regions ----------------------------------------------------------------------

@dataclass
class RegionLabeling:
    labels: list[int]
    n_clusters: int

    def members(self, label: int) -> list[int]:
        return [i for i, c in enumerate(self.labels) if c == label]


def cluster(buffer: VisitBuffer, linking_radius: float = DEFAULT_LINK_RADIUS,
            min_cluster_size: int = DEFAULT_MIN_CLUSTER) -> RegionLabeling:
    """Radius-linked connected components; components smaller than the minimum are noise.

    Cluster ids are assigned in order of each component's lowest point index.
    """
    if linking_radius <= buffer.tau:
        raise ValueError("linking radius must exceed tau")
    return cluster_points(np.asarray(buffer.points, dtype=float).reshape(-1, 3), linking_radius, min_cluster_size)


def cluster_points(points: np.ndarray, linking_radius: float, min_cluster_size: int) -> RegionLabeling:
    n = len(points)
    if n == 0:
        return RegionLabeling([], 0)
    pairs = cKDTree(points).query_pairs(linking_radius, output_type="ndarray")
    adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    _, comp = connected_components(adj, directed=False)
    sizes = np.bincount(comp)
    relabel: dict[int, int] = {}
    labels = []
    for c in comp:
        if sizes[c] < min_cluster_size:
            labels.append(NOISE)
            continue
        if c not in relabel:
            relabel[c] = len(relabel)
        labels.append(relabel[c])
    return RegionLabeling(labels, len(relabel))


@dataclass
class SemanticEdge:
    count: int
    mean_dh: float
    tag: str


@dataclass
class SemanticMap:
    edges: dict[tuple[int, int], SemanticEdge]

    def write(self, path: str | Path) -> None:
        lines = [f"{a} {b} {e.tag} {e.count} {e.mean_dh!r}" for (a, b), e in sorted(self.edges.items())]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))

    @classmethod
    def read(cls, path: str | Path) -> SemanticMap:
        edges = {}
        for line in Path(path).read_text().splitlines():
            if line.strip():
                a, b, tag, count, dh = line.split()
                edges[(int(a), int(b))] = SemanticEdge(int(count), float(dh), tag)
        return cls(edges)


def direction_tag(mean_dh: float) -> str:
    if mean_dh > LEVEL_BAND:
        return UP
    if mean_dh < -LEVEL_BAND:
        return DOWN
    return LEVEL


def semantic_map(graph: ConnectivityGraph, labeling: RegionLabeling, buffer: VisitBuffer) -> SemanticMap:
    """Aggregate point edges by (cluster, cluster); noise points do not contribute."""
    if len(labeling.labels) < len(graph):
        raise ValueError("labeling does not cover the graph nodes")
    acc: dict[tuple[int, int], list] = {}
    pts = buffer.points
    for (i, j), c in sorted(graph.edges.items()):
        a, b = labeling.labels[i], labeling.labels[j]
        if a == b or a == NOISE or b == NOISE:
            continue
        slot = acc.setdefault((a, b), [0, 0.0, 0])
        slot[0] += c
        slot[1] += pts[j][1] - pts[i][1]
        slot[2] += 1
    edges = {}
    for key, (count, dh_sum, n) in acc.items():
        mean = dh_sum / n
        edges[key] = SemanticEdge(count, mean, direction_tag(mean))
    return SemanticMap(edges)
