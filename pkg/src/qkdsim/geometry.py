"""Planar geometry primitives: distances, ray angles, edge ordering, crossings."""

from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, slots=True)
class Position:
    x: float
    y: float


def euclidean_distance(a: Position, b: Position) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def angle_of(origin: Position, target: Position) -> float:
    """Angle of the ray origin->target, normalized to [0, 2*pi)."""
    return math.atan2(target.y - origin.y, target.x - origin.x) % TWO_PI


def ccw_next_neighbor(
    origin: Position,
    reference_angle: float,
    neighbors: list[tuple[int, Position]],
) -> int:
    """First neighbor strictly counterclockwise from the reference ray.

    A neighbor lying exactly on the reference ray counts as a full turn away,
    so a lone neighbor on the ray is still returned (the return-to-sender
    case). Angle ties break toward the smaller node id.
    """
    if not neighbors:
        raise ValueError("node has no neighbors")

    def turn(item: tuple[int, Position]) -> tuple[float, int]:
        node_id, pos = item
        delta = (angle_of(origin, pos) - reference_angle) % TWO_PI
        if delta < 1e-12:
            delta = TWO_PI
        return delta, node_id

    return min(neighbors, key=turn)[0]


def orientation(a: Position, b: Position, c: Position) -> float:
    """Cross product of ab x ac; positive when a->b->c turns counterclockwise."""
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)


def segments_cross(a: Position, b: Position, c: Position, d: Position) -> bool:
    """Proper crossing of segments ab and cd; shared endpoints do not count."""
    if a in (c, d) or b in (c, d):
        return False
    o1 = orientation(a, b, c)
    o2 = orientation(a, b, d)
    o3 = orientation(c, d, a)
    o4 = orientation(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0
