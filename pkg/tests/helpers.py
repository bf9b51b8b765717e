"""Shared test fixtures and independent oracles used across test modules."""

import math
from itertools import combinations

from qkdsim.config import RunConfig
from qkdsim.engine import Simulation
from qkdsim.geometry import Position, segments_cross
from qkdsim.topology import Topology

GRID = 100.0 / math.sqrt(2.0)


def _dist_sq(a: Position, b: Position) -> float:
    return (a.x - b.x) ** 2 + (a.y - b.y) ** 2


def gabriel_violations(topo: Topology) -> list:
    """Brute-force oracle: every (edge, witness) pair via the Pythagorean test.

    Squared distances are formed directly from coordinate differences so a
    witness exactly on the circle boundary is not misreported.
    """
    bad = []
    for u, v in topo.edges:
        pu, pv = topo.position(u), topo.position(v)
        for w, pw in topo.nodes:
            if w in (u, v):
                continue
            if _dist_sq(pu, pw) + _dist_sq(pw, pv) < _dist_sq(pu, pv):
                bad.append(((u, v), w))
    return bad


def crossing_pairs(topo: Topology) -> list:
    """Brute-force planarity oracle over all edge pairs."""
    pos = {nid: p for nid, p in topo.nodes}
    bad = []
    for (a, b), (c, d) in combinations(sorted(topo.edges), 2):
        if segments_cross(pos[a], pos[b], pos[c], pos[d]):
            bad.append(((a, b), (c, d)))
    return bad


def bfs_reachable(topo: Topology, src: int, dst: int) -> bool:
    seen = {src}
    stack = [src]
    while stack:
        u = stack.pop()
        for v in topo.neighbors(u):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return dst in seen


def two_node_topology() -> Topology:
    return Topology(
        nodes=[(0, Position(10, 10)), (1, Position(20, 10))],
        edges={(0, 1)},
        grid_size=40.0,
    )


def ample_cfg(**kw) -> RunConfig:
    cfg = RunConfig(**kw)
    cfg.link.init_key_bytes_range = (25_000_000.0, 25_000_000.0)
    return cfg


def narrative_topology() -> Topology:
    """Hand-built layout: a relay whose only forward link is unavailable.

    Node ids: a=0 (source), k=1, j=2, l=3, i=4, g=5 (destination). The only
    path to g runs over the link j-i, which carries no key material.
    """
    return Topology(
        nodes=[
            (0, Position(16.7, 1.1)),
            (1, Position(4.0, 7.0)),
            (2, Position(6.0, 6.0)),
            (3, Position(5.5, 8.0)),
            (4, Position(8.0, 6.0)),
            (5, Position(10.0, 6.0)),
        ],
        edges={(0, 1), (1, 2), (1, 3), (2, 3), (2, 4), (4, 5)},
        grid_size=20.0,
    )


def narrative_sim() -> Simulation:
    cfg = RunConfig(seed=1, duration_s=3.0)
    cfg.link.init_key_bytes_range = (5_000_000.0, 5_000_000.0)
    cfg.link.rate_bps = 0.0  # no charging: no signaling noise, stable metrics
    cfg.traffic.rate_bps = 1000.0  # exactly one packet at t=0
    sim = Simulation(cfg, narrative_topology())
    dead = sim.links[(2, 4)]
    dead.storage.m_cur = 0.0
    dead.initial_key = 0.0
    return sim
