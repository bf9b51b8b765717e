"""Command-line interface: simulate, gen-topology and sweep subcommands.

Exit status is 0 on success and 2 on configuration errors. The environment
variable QKDSIM_LOG selects log verbosity (debug, info, warning, error).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import asdict

from .config import ConfigError, RunConfig, TopologySpec
from .engine import Simulation, SimulationError
from .experiment import run_sweep, topology_for
from .stats import write_csv
from .topology import TopologyError, WaxmanConfig, generate_topology, load_topology, save_topology


def _setup_logging() -> None:
    level = os.environ.get("QKDSIM_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _add_simulate(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("simulate", help="run one simulation and emit a CSV row")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--topology", metavar="FILE", help="load a topology file")
    src.add_argument("--waxman", type=int, metavar="N", help="generate an N-node random topology")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--gabriel", action="store_true", help="planarize the generated topology")
    p.add_argument("--grid-size", type=float, default=TopologySpec().grid_size)
    p.add_argument("--protocol", choices=("gpsrq", "dv"), default="gpsrq")
    p.add_argument("--beta", type=float, default=0.6)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--t-avg-window", type=int, default=5)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("--duration", type=float, default=150.0)
    p.add_argument("--traffic-rate", type=float, default=1_000_000.0, help="bits/second")
    p.add_argument("--packet-bytes", type=int, default=512)
    p.add_argument("--traffic-class", choices=("best_effort", "real_time", "premium"),
                   default="best_effort")
    p.add_argument("--link-config", action="append", default=[], metavar="KEY=VALUE",
                   help="override a link config key (e.g. rate_bps=100000)")
    p.add_argument("--out", metavar="FILE", help="write CSV here instead of stdout")
    p.add_argument("--dump-caches", action="store_true",
                   help="print per-node exclusion caches after the run")
    p.add_argument("--metrics-csv", metavar="FILE",
                   help="dump per-event link metric snapshots")


def _apply_link_overrides(cfg: RunConfig, overrides: list[str]) -> None:
    numeric = {
        "min_key_bytes", "max_key_bytes", "rate_bps", "charge_period_s",
        "bandwidth_bps", "round_load_gain", "round_stddev_frac", "round_floor_s",
    }
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--link-config expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        if key == "auth_key_bits":
            cfg.link.auth_key_bits = int(raw)
        elif key == "init_key_bytes_range":
            lo, hi = raw.split(":")
            cfg.link.init_key_bytes_range = (float(lo), float(hi))
        elif key in numeric:
            setattr(cfg.link, key, float(raw))
        else:
            raise ConfigError(f"unknown link config key {key!r}")


def _cmd_simulate(args: argparse.Namespace) -> int:
    run_cfg = RunConfig(
        protocol=args.protocol,
        seed=args.seed,
        duration_s=args.duration,
        beta=args.beta,
        alpha=args.alpha,
        t_avg_window=args.t_avg_window,
        cache_enabled=not args.no_cache,
    )
    run_cfg.traffic.rate_bps = args.traffic_rate
    run_cfg.traffic.packet_bytes = args.packet_bytes
    run_cfg.traffic.traffic_class = args.traffic_class
    _apply_link_overrides(run_cfg, args.link_config)
    run_cfg.validate()

    if args.topology:
        topo = load_topology(args.topology)
    else:
        spec = TopologySpec(node_count=args.waxman, grid_size=args.grid_size,
                            gabriel=args.gabriel)
        spec.validate()
        topo = topology_for(spec, args.seed)

    sim = Simulation(run_cfg, topo, metrics_log=bool(args.metrics_csv))
    stats = sim.run()

    if args.metrics_csv:
        with open(args.metrics_csv, "w", encoding="ascii") as fh:
            fh.write("time_s,node_u,node_v,q_frac,q_m,p_m,r_m\n")
            for row in sim.metrics_log:
                fh.write(",".join(repr(x) for x in row) + "\n")
    if args.dump_caches:
        for line in sim.dump_caches():
            print(line)

    meta = {
        "command": "simulate",
        "config": asdict(run_cfg),
        "topology_retries": topo.retries,
    }
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            write_csv(fh, [stats], metadata=meta, aggregate=False)
    else:
        write_csv(sys.stdout, [stats], metadata=meta, aggregate=False)
    return 0


def _add_gen_topology(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("gen-topology", help="generate a topology file")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--grid-size", type=float, default=TopologySpec().grid_size)
    p.add_argument("--theta", type=float, default=0.4)
    p.add_argument("--omega", type=float, default=0.4)
    p.add_argument("--lambda", dest="lambda_max", type=float, default=None)
    p.add_argument("--links-per-node", type=int, default=2)
    p.add_argument("--gabriel", action="store_true")
    p.add_argument("--out", required=True, metavar="FILE")


def _cmd_gen_topology(args: argparse.Namespace) -> int:
    cfg = WaxmanConfig(
        node_count=args.nodes,
        seed=args.seed,
        grid_size=args.grid_size,
        theta=args.theta,
        omega=args.omega,
        lambda_max=args.lambda_max,
        links_per_node=args.links_per_node,
    )
    topo = generate_topology(cfg, planarize=args.gabriel)
    save_topology(topo, args.out)
    print(f"wrote {args.out}: {len(topo.nodes)} nodes, {len(topo.edges)} edges, "
          f"{topo.retries} regeneration(s)")
    return 0


def _add_sweep(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("sweep", help="run a sweep specification file")
    p.add_argument("--spec", required=True, metavar="FILE")
    p.add_argument("--out", metavar="FILE", help="write CSV here instead of stdout")


def _cmd_sweep(args: argparse.Namespace) -> int:
    with open(args.spec, encoding="ascii") as fh:
        text = fh.read()
    rows, meta = run_sweep(text)
    meta["command"] = "sweep"
    meta["spec"] = args.spec
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            write_csv(fh, rows, metadata=meta)
    else:
        write_csv(sys.stdout, rows, metadata=meta)
    return 0


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="qkdsim",
                                     description="Trusted-relay QKD network simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate(sub)
    _add_gen_topology(sub)
    _add_sweep(sub)
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "gen-topology":
            return _cmd_gen_topology(args)
        return _cmd_sweep(args)
    except (ConfigError, TopologyError, SimulationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
