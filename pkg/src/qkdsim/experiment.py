"""Experiment harness: topology provisioning, run expansion, sweep specs.

A sweep specification is a plain-text file of ``key=value`` lines where any
value may be a comma-separated list; runs are the cartesian product of all
list-valued keys. Recognized keys and their defaults mirror the dataclasses
in config.py; see README for the full table.
"""

from __future__ import annotations

import logging

from .config import (
    ConfigError,
    ExperimentConfig,
    LinkConfig,
    RunConfig,
    TopologySpec,
    TrafficConfig,
)
from .engine import run_simulation
from .stats import RunStats
from .topology import Topology, WaxmanConfig, generate_topology

logger = logging.getLogger(__name__)


def topology_for(spec: TopologySpec, seed: int) -> Topology:
    cfg = WaxmanConfig(
        node_count=spec.node_count,
        seed=seed,
        grid_size=spec.grid_size,
        theta=spec.theta,
        omega=spec.omega,
        lambda_max=spec.lambda_max,
        links_per_node=spec.links_per_node,
    )
    return generate_topology(cfg, planarize=spec.gabriel)


def run_one(run_cfg: RunConfig, topo_spec: TopologySpec) -> RunStats:
    topology = topology_for(topo_spec, run_cfg.seed)
    return run_simulation(run_cfg, topology)


def run_experiment(exp: ExperimentConfig) -> list[RunStats]:
    """Execute every (node count, seed) run; failures become error rows."""
    results: list[RunStats] = []
    for run_cfg, topo_spec in exp.expand():
        try:
            results.append(run_one(run_cfg, topo_spec))
        except Exception as exc:  # noqa: BLE001 - sweep must continue
            logger.error("run failed (nodes=%d seed=%d): %s",
                         topo_spec.node_count, run_cfg.seed, exc)
            results.append(RunStats(
                protocol=run_cfg.protocol,
                nodes=topo_spec.node_count,
                seed=run_cfg.seed,
                beta=run_cfg.beta,
                alpha=run_cfg.alpha,
                t_avg_window=run_cfg.t_avg_window,
                cache=run_cfg.cache_enabled,
                error=str(exc),
            ))
    return results


_BOOL_WORDS = {"on": True, "true": True, "1": True, "yes": True,
               "off": False, "false": False, "0": False, "no": False}


def _parse_bool(raw: str) -> bool:
    try:
        return _BOOL_WORDS[raw.strip().lower()]
    except KeyError:
        raise ConfigError(f"expected on/off value, got {raw!r}") from None


def _parse_range(raw: str) -> tuple[float, float]:
    parts = raw.split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected lo:hi range, got {raw!r}")
    return float(parts[0]), float(parts[1])


# key -> (per-item parser, is a cartesian sweep axis)
_SWEEP_KEYS = {
    "protocol": (str, True),
    "nodes": (int, False),
    "seeds": (int, False),
    "beta": (float, True),
    "alpha": (float, True),
    "t_avg_window": (int, True),
    "cache": (_parse_bool, True),
    "duration": (float, True),
    "queue_capacity": (int, True),
    "gabriel": (_parse_bool, True),
    "grid_size": (float, True),
    "theta": (float, True),
    "omega": (float, True),
    "lambda": (float, True),
    "links_per_node": (int, True),
    "traffic_rate_bps": (float, True),
    "packet_bytes": (int, True),
    "traffic_class": (str, True),
    "max_delay_s": (float, True),
    "crypto_mode": (str, True),
    "min_key_bytes": (float, True),
    "max_key_bytes": (float, True),
    "init_key_bytes": (_parse_range, True),
    "rate_bps": (float, True),
    "charge_period_s": (float, True),
    "bandwidth_bps": (float, True),
    "auth_key_bits": (int, True),
    "round_load_gain": (float, True),
    "round_stddev_frac": (float, True),
    "dv_period_s": (float, True),
    "dv_merge_window_s": (float, True),
    "dv_liveness": (str, True),
}


def parse_sweep_spec(text: str) -> list[ExperimentConfig]:
    """Parse key=value lines into experiment configs (cartesian product)."""
    values: dict[str, list] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"sweep spec line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _SWEEP_KEYS:
            raise ConfigError(f"sweep spec line {lineno}: unknown key {key!r}")
        parser, _ = _SWEEP_KEYS[key]
        items = raw.split(",") if key != "init_key_bytes" else [raw]
        values[key] = [parser(item.strip()) for item in items]

    node_counts = values.pop("nodes", [30])
    seeds = values.pop("seeds", [1, 2, 3, 4])

    axes = [(key, vals) for key, vals in values.items() if _SWEEP_KEYS[key][1]]
    combos: list[dict] = [{}]
    for key, vals in axes:
        combos = [dict(combo, **{key: v}) for combo in combos for v in vals]

    experiments = []
    for combo in combos:
        run = RunConfig(
            protocol=combo.get("protocol", "gpsrq"),
            duration_s=combo.get("duration", 150.0),
            beta=combo.get("beta", 0.6),
            alpha=combo.get("alpha", 0.5),
            t_avg_window=combo.get("t_avg_window", 5),
            cache_enabled=combo.get("cache", True),
            queue_capacity=combo.get("queue_capacity", 1000),
            dv_period_s=combo.get("dv_period_s", 15.0),
            dv_merge_window_s=combo.get("dv_merge_window_s", 1.0),
            dv_liveness=combo.get("dv_liveness", "probe"),
            link=LinkConfig(
                min_key_bytes=combo.get("min_key_bytes", 1_000_000.0),
                max_key_bytes=combo.get("max_key_bytes", 100_000_000.0),
                init_key_bytes_range=combo.get("init_key_bytes", (500_000.0, 25_000_000.0)),
                rate_bps=combo.get("rate_bps", 100_000.0),
                charge_period_s=combo.get("charge_period_s", 7.0),
                bandwidth_bps=combo.get("bandwidth_bps", 10_000_000.0),
                auth_key_bits=combo.get("auth_key_bits", 256),
                round_load_gain=combo.get("round_load_gain", 2.0),
                round_stddev_frac=combo.get("round_stddev_frac", 0.1),
            ),
            traffic=TrafficConfig(
                rate_bps=combo.get("traffic_rate_bps", 1_000_000.0),
                packet_bytes=combo.get("packet_bytes", 512),
                traffic_class=combo.get("traffic_class", "best_effort"),
                max_delay_s=combo.get("max_delay_s"),
                crypto_mode=combo.get("crypto_mode", "otp"),
            ),
        )
        topo = TopologySpec(
            grid_size=combo.get("grid_size", TopologySpec().grid_size),
            theta=combo.get("theta", 0.4),
            omega=combo.get("omega", 0.4),
            lambda_max=combo.get("lambda"),
            links_per_node=combo.get("links_per_node", 2),
            gabriel=combo.get("gabriel", True),
        )
        experiments.append(ExperimentConfig(
            node_counts=list(node_counts),
            seeds=list(seeds),
            base=run,
            topology=topo,
        ))
    return experiments


def run_sweep(text: str) -> tuple[list[RunStats], dict]:
    """Run every experiment in a sweep spec; returns (rows, metadata).

    The metadata echoes every experiment's full parameter set so result
    files are self-describing.
    """
    experiments = parse_sweep_spec(text)
    rows: list[RunStats] = []
    meta: dict = {"experiments": len(experiments)}
    for i, exp in enumerate(experiments):
        meta[f"experiment_{i:03d}"] = exp.metadata()
        rows.extend(run_experiment(exp))
    meta["runs"] = len(rows)
    return rows, meta
