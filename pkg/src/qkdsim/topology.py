"""Random Waxman topologies, Gabriel-graph planarization and a line-oriented file format."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .geometry import Position, angle_of, ccw_next_neighbor, euclidean_distance

MAX_CONNECT_RETRIES = 100
MAX_LINK_PASSES = 100


class TopologyError(Exception):
    """Raised for malformed topologies or infeasible generator configs."""


@dataclass(frozen=True, slots=True)
class WaxmanConfig:
    """Parameters of the random-graph generator.

    Edge probability between nodes at distance d is
    theta * exp(-d / (omega * lambda_max)); each new node attempts to place
    ``links_per_node`` undirected edges toward already-placed nodes. When
    ``lambda_max`` is omitted it defaults to the grid diagonal, the largest
    possible inter-node distance.
    """

    node_count: int
    seed: int
    grid_size: float
    theta: float = 0.4
    omega: float = 0.4
    lambda_max: float | None = None
    links_per_node: int = 2

    def __post_init__(self) -> None:
        if self.node_count < 2:
            raise TopologyError("node_count must be at least 2")
        if not (0.0 < self.theta <= 1.0) or not (0.0 < self.omega <= 1.0):
            raise TopologyError("theta and omega must lie in (0, 1]")
        if self.grid_size <= 0.0:
            raise TopologyError("grid_size must be positive")
        if self.lambda_max is not None and self.lambda_max <= 0.0:
            raise TopologyError("lambda_max must be positive")
        if self.links_per_node < 1:
            raise TopologyError("links_per_node must be at least 1")

    def resolved_lambda(self) -> float:
        if self.lambda_max is not None:
            return self.lambda_max
        return self.grid_size * math.sqrt(2.0)


@dataclass
class Topology:
    nodes: list[tuple[int, Position]]
    edges: set[tuple[int, int]]
    grid_size: float
    retries: int = 0

    _pos: dict[int, Position] = field(init=False, repr=False)
    _adj: dict[int, list[int]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._pos = {nid: pos for nid, pos in self.nodes}
        if len(self._pos) != len(self.nodes):
            raise TopologyError("duplicate node ids")
        normalized = set()
        adj: dict[int, list[int]] = {nid: [] for nid in self._pos}
        for u, v in self.edges:
            if u == v:
                raise TopologyError(f"self-loop at node {u}")
            if u not in self._pos or v not in self._pos:
                raise TopologyError(f"edge ({u}, {v}) references undeclared node")
            normalized.add((min(u, v), max(u, v)))
        self.edges = normalized
        for u, v in sorted(self.edges):
            adj[u].append(v)
            adj[v].append(u)
        self._adj = {nid: sorted(ns) for nid, ns in adj.items()}

    def position(self, node_id: int) -> Position:
        return self._pos[node_id]

    def neighbors(self, node_id: int) -> list[int]:
        return self._adj[node_id]

    def node_ids(self) -> list[int]:
        return [nid for nid, _ in self.nodes]


def waxman_edge_probability(d: float, cfg: WaxmanConfig) -> float:
    """Probability of interconnecting two nodes at distance d."""
    if d < 0.0:
        raise ValueError("distance must be non-negative")
    return cfg.theta * math.exp(-d / (cfg.omega * cfg.resolved_lambda()))


def waxman_accepts(d: float, cfg: WaxmanConfig, rng: random.Random) -> bool:
    """One Bernoulli edge-acceptance trial at distance d."""
    return rng.random() < waxman_edge_probability(d, cfg)


def _grow(cfg: WaxmanConfig, rng: random.Random) -> Topology:
    """Incremental growth: each new node draws partners with weight P_e."""
    n = cfg.node_count
    points = [
        Position(rng.uniform(0.0, cfg.grid_size), rng.uniform(0.0, cfg.grid_size))
        for _ in range(n)
    ]
    edges: set[tuple[int, int]] = set()
    for i in range(1, n):
        wanted = min(cfg.links_per_node, i)
        pool = list(range(i))
        weights = [
            waxman_edge_probability(euclidean_distance(points[i], points[j]), cfg)
            for j in pool
        ]
        for _ in range(wanted):
            total = sum(weights)
            if total <= 0.0:
                break
            pick = rng.random() * total
            acc = 0.0
            chosen = len(pool) - 1
            for idx, w in enumerate(weights):
                acc += w
                if pick < acc:
                    chosen = idx
                    break
            edges.add((pool[chosen], i))
            del pool[chosen]
            del weights[chosen]
    return Topology(
        nodes=[(k, points[k]) for k in range(n)],
        edges=edges,
        grid_size=cfg.grid_size,
    )


def is_connected(topo: Topology) -> bool:
    ids = topo.node_ids()
    if not ids:
        return False
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        u = stack.pop()
        for v in topo.neighbors(u):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(ids)


def generate_topology(cfg: WaxmanConfig, planarize: bool = False) -> Topology:
    """Generate a connected random topology, optionally Gabriel-planarized.

    The planar variant keeps the sampled node placement and connects it as
    the Gabriel graph of the point set (the complete graph run through the
    Gabriel filter), which is planar and contains the Euclidean minimum
    spanning tree. Either way, generation retries with a derived seed until
    the result is connected; the retry count lands in ``retries``.
    """
    for attempt in range(MAX_CONNECT_RETRIES):
        rng = random.Random(f"{cfg.seed}:waxman:{attempt}")
        candidate = _grow(cfg, rng)
        if planarize:
            complete = Topology(
                nodes=list(candidate.nodes),
                edges={(u, v) for u in range(cfg.node_count) for v in range(u + 1, cfg.node_count)},
                grid_size=cfg.grid_size,
            )
            final = gabrielize(complete)
        else:
            final = candidate
        if is_connected(final):
            final.retries = attempt
            return final
    raise TopologyError(
        f"no connected topology found in {MAX_CONNECT_RETRIES} attempts (seed={cfg.seed})"
    )


def generate_waxman(cfg: WaxmanConfig) -> Topology:
    return generate_topology(cfg, planarize=False)


def gabrielize(topo: Topology) -> Topology:
    """Keep only edges whose diameter circle contains no third node.

    Edge (u, v) is dropped when some node w satisfies
    d(u,w)^2 + d(w,v)^2 < d(u,v)^2, i.e. w lies strictly inside the circle
    whose diameter is the segment uv. Node set and positions are unchanged.
    """
    kept: set[tuple[int, int]] = set()
    for u, v in topo.edges:
        pu, pv = topo.position(u), topo.position(v)
        duv_sq = (pu.x - pv.x) ** 2 + (pu.y - pv.y) ** 2
        ok = True
        for w, pw in topo.nodes:
            if w == u or w == v:
                continue
            duw_sq = (pu.x - pw.x) ** 2 + (pu.y - pw.y) ** 2
            dwv_sq = (pw.x - pv.x) ** 2 + (pw.y - pv.y) ** 2
            if duw_sq + dwv_sq < duv_sq:
                ok = False
                break
        if ok:
            kept.add((u, v))
    return Topology(
        nodes=list(topo.nodes),
        edges=kept,
        grid_size=topo.grid_size,
        retries=topo.retries,
    )


def counterclockwise_next_edge(at: int, reference_angle: float, topo: Topology) -> int:
    """Neighbor of ``at`` on the first edge counterclockwise from the reference ray."""
    neighbors = [(v, topo.position(v)) for v in topo.neighbors(at)]
    return ccw_next_neighbor(topo.position(at), reference_angle, neighbors)


def reference_angle_toward(topo: Topology, at: int, target: int) -> float:
    return angle_of(topo.position(at), topo.position(target))


def save_topology(topo: Topology, path: str) -> None:
    """Write the line-oriented topology format (coordinates at 6 decimals)."""
    lines = [f"topology v1 {len(topo.nodes)} {len(topo.edges)} {topo.grid_size:.6f}"]
    for nid, pos in topo.nodes:
        lines.append(f"N {nid} {pos.x:.6f} {pos.y:.6f}")
    for u, v in sorted(topo.edges):
        lines.append(f"E {u} {v}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_topology(path: str) -> Topology:
    with open(path, encoding="ascii") as fh:
        raw = [line.strip() for line in fh if line.strip()]
    if not raw:
        raise TopologyError(f"{path}: empty topology file")
    head = raw[0].split()
    if len(head) != 5 or head[0] != "topology" or head[1] != "v1":
        raise TopologyError(f"{path}: bad header line {raw[0]!r}")
    node_count, edge_count = int(head[2]), int(head[3])
    grid_size = float(head[4])
    nodes: list[tuple[int, Position]] = []
    edges: set[tuple[int, int]] = set()
    for line in raw[1:]:
        parts = line.split()
        if parts[0] == "N" and len(parts) == 4:
            nodes.append((int(parts[1]), Position(float(parts[2]), float(parts[3]))))
        elif parts[0] == "E" and len(parts) == 3:
            edges.add((int(parts[1]), int(parts[2])))
        else:
            raise TopologyError(f"{path}: bad line {line!r}")
    if len(nodes) != node_count or len(edges) != edge_count:
        raise TopologyError(f"{path}: header counts do not match body")
    return Topology(nodes=nodes, edges=edges, grid_size=grid_size)
