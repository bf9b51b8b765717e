"""Proactive distance-vector baseline with destination sequence numbers.

Every node periodically broadcasts its full routing table; changed routes
are re-advertised as triggered incremental updates. Destinations stamp
their own entries with even sequence numbers; a node that loses a link
poisons the affected routes with an incremented odd sequence number.
Higher sequence numbers always win, equal sequence prefers fewer hops.
"""

from __future__ import annotations

from dataclasses import dataclass

INFINITE_METRIC = 1 << 16


@dataclass(slots=True)
class DvRoute:
    next_hop: int | None
    metric: int
    seq: int


class DvNode:
    def __init__(self, node_id: int):
        self.node_id = node_id
        self.own_seq = 0
        self.table: dict[int, DvRoute] = {node_id: DvRoute(node_id, 0, 0)}
        self.pending: dict[int, tuple[int, int]] = {}

    def bump_own_sequence(self) -> None:
        self.own_seq += 2
        self.table[self.node_id].seq = self.own_seq

    def full_dump(self) -> list[tuple[int, int, int]]:
        return [
            (dst, route.metric, route.seq)
            for dst, route in sorted(self.table.items())
        ]

    def pending_dump(self) -> list[tuple[int, int, int]]:
        return [(dst, metric, seq) for dst, (metric, seq) in sorted(self.pending.items())]

    def process_update(self, from_neighbor: int, entries) -> list[int]:
        """Merge an advertisement received from a neighbor; returns changed routes."""
        changed: list[int] = []
        for dst, metric, seq in entries:
            if dst == self.node_id:
                continue
            cand_metric = metric + 1 if metric < INFINITE_METRIC else INFINITE_METRIC
            cur = self.table.get(dst)
            accept = (
                cur is None
                or seq > cur.seq
                or (seq == cur.seq and cand_metric < cur.metric)
            )
            if not accept:
                continue
            if cur is not None and (cur.next_hop, cur.metric, cur.seq) == (from_neighbor, cand_metric, seq):
                continue
            self.table[dst] = DvRoute(from_neighbor, cand_metric, seq)
            changed.append(dst)
        for dst in changed:
            route = self.table[dst]
            self.pending[dst] = (route.metric, route.seq)
        return changed

    def mark_link_dead(self, neighbor: int) -> list[int]:
        """Poison every route through a dead neighbor with an odd sequence."""
        changed: list[int] = []
        for dst, route in self.table.items():
            if route.next_hop == neighbor and route.metric < INFINITE_METRIC:
                self.table[dst] = DvRoute(None, INFINITE_METRIC, route.seq + 1)
                changed.append(dst)
        for dst in changed:
            route = self.table[dst]
            self.pending[dst] = (route.metric, route.seq)
        return changed

    def next_hop(self, dst: int) -> int | None:
        route = self.table.get(dst)
        if route is None or route.metric >= INFINITE_METRIC:
            return None
        return route.next_hop
