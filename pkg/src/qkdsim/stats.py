"""Per-run statistics, CSV emission and overhead accounting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, TextIO

CSV_COLUMNS = [
    "protocol",
    "nodes",
    "seed",
    "beta",
    "alpha",
    "t_avg_window",
    "cache",
    "sent",
    "received",
    "pdr",
    "mean_delay_s",
    "mean_hops",
    "ovh_pkts",
    "ovh_bytes",
    "key_data_bits",
    "key_routing_bits",
    "drop_queue",
    "drop_delay",
    "drop_source",
    "drop_link",
]

# Modeled reliable-transport handshake around each signaling exchange.
HANDSHAKE_PACKETS = 3
HANDSHAKE_BYTES = 120


@dataclass(slots=True)
class RunStats:
    protocol: str
    nodes: int
    seed: int
    beta: float
    alpha: float
    t_avg_window: int
    cache: bool
    sent: int = 0
    received: int = 0
    mean_delay_s: float = 0.0
    mean_hops: float = 0.0
    ovh_pkts: int = 0
    ovh_bytes: int = 0
    key_data_bits: float = 0.0
    key_routing_bits: float = 0.0
    drop_queue: int = 0
    drop_delay: int = 0
    drop_source: int = 0
    drop_link: int = 0
    in_flight: int = 0
    loop2_count: int = 0
    reserve_dips: int = 0
    trace_hash: str = ""
    topology_retries: int = 0
    served_by_class: dict = None
    dropped_by_class: dict = None
    error: str = ""

    @property
    def drops_total(self) -> int:
        return self.drop_queue + self.drop_delay + self.drop_source + self.drop_link

    @property
    def pdr(self) -> float:
        """Delivered fraction of packets whose fate resolved inside the run.

        Packets still in flight at the end are excluded from the denominator
        and reported separately.
        """
        resolved = self.sent - self.in_flight
        if resolved <= 0:
            return 0.0
        return self.received / resolved

    def csv_row(self) -> list[str]:
        return [
            self.protocol,
            str(self.nodes),
            str(self.seed),
            repr(self.beta),
            repr(self.alpha),
            str(self.t_avg_window),
            "on" if self.cache else "off",
            str(self.sent),
            str(self.received),
            repr(self.pdr),
            repr(self.mean_delay_s),
            repr(self.mean_hops),
            str(self.ovh_pkts),
            str(self.ovh_bytes),
            repr(self.key_data_bits),
            repr(self.key_routing_bits),
            str(self.drop_queue),
            str(self.drop_delay),
            str(self.drop_source),
            str(self.drop_link),
        ]


def _group_key(s: RunStats) -> tuple:
    return (s.protocol, s.nodes, s.beta, s.alpha, s.t_avg_window, s.cache)


def aggregate_means(stats: list[RunStats]) -> list[list[str]]:
    """One mean row per configuration group, with the seed column set to "mean"."""
    groups: dict[tuple, list[RunStats]] = {}
    for s in stats:
        groups.setdefault(_group_key(s), []).append(s)
    rows = []
    for key in sorted(groups, key=repr):
        members = groups[key]
        n = len(members)
        protocol, nodes, beta, alpha, window, cache = key
        rows.append([
            protocol,
            str(nodes),
            "mean",
            repr(beta),
            repr(alpha),
            str(window),
            "on" if cache else "off",
            repr(sum(m.sent for m in members) / n),
            repr(sum(m.received for m in members) / n),
            repr(sum(m.pdr for m in members) / n),
            repr(sum(m.mean_delay_s for m in members) / n),
            repr(sum(m.mean_hops for m in members) / n),
            repr(sum(m.ovh_pkts for m in members) / n),
            repr(sum(m.ovh_bytes for m in members) / n),
            repr(sum(m.key_data_bits for m in members) / n),
            repr(sum(m.key_routing_bits for m in members) / n),
            repr(sum(m.drop_queue for m in members) / n),
            repr(sum(m.drop_delay for m in members) / n),
            repr(sum(m.drop_source for m in members) / n),
            repr(sum(m.drop_link for m in members) / n),
        ])
    return rows


def write_csv(
    out: TextIO,
    stats: list[RunStats],
    metadata: dict | None = None,
    aggregate: bool = True,
) -> None:
    """Emit one row per run plus aggregated mean rows.

    Metadata and per-run trace hashes go into '#' comment lines so the data
    columns stay fixed.
    """
    if metadata:
        for key in sorted(metadata):
            out.write(f"# {key}={metadata[key]!r}\n")
    for s in stats:
        if s.error:
            out.write(f"# error seed={s.seed} nodes={s.nodes}: {s.error}\n")
        elif s.trace_hash:
            out.write(f"# run protocol={s.protocol} nodes={s.nodes} seed={s.seed} trace_hash={s.trace_hash}\n")
            if s.served_by_class is not None:
                out.write(
                    f"# classes seed={s.seed} served={s.served_by_class!r} "
                    f"dropped={s.dropped_by_class!r}\n"
                )
    out.write(",".join(CSV_COLUMNS) + "\n")
    good = [s for s in stats if not s.error]
    for s in good:
        out.write(",".join(s.csv_row()) + "\n")
    if aggregate and good:
        for row in aggregate_means(good):
            out.write(",".join(row) + "\n")


def collect_overhead(trace: Iterable[tuple]) -> tuple[int, int]:
    """Recount routing-overhead packets and bytes from a run's event trace.

    Signaling exchanges count their data message plus the modeled reliable
    handshake; distance-vector and hello packets count individually.
    """
    pkts = 0
    size = 0
    for entry in trace:
        if entry[1] != "tx":
            continue
        kind, wire = entry[2], entry[5]
        if kind == "signaling":
            pkts += 1 + HANDSHAKE_PACKETS
            size += wire + HANDSHAKE_BYTES
        elif kind in ("dv", "hello"):
            pkts += 1
            size += wire
    return pkts, size
