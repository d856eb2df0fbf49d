#!/usr/bin/env python3
"""Parameter studies: sweep the cluster-target fraction f and the fleet size
on one synthetic city, printing Gini / delivery-time / SLA trends.

Usage:
    python scripts/sweep_parameters.py [--seeds 3] [--vehicles 200] ...
"""
import argparse
import sys

from fairdispatch import metrics, simulator, workload
from fairdispatch.allocator import AllocatorConfig


def simulate(params, **alloc_kw):
    net, _, vehicles, orders = workload.generate_city(params)
    cfg = simulator.SimConfig(allocator_cfg=AllocatorConfig(**alloc_kw))
    log = simulator.run(net, orders, vehicles, cfg)
    report, _ = metrics.compute_report(log, net, grid_resolution=16)
    return report


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=800)
    parser.add_argument("--vehicles", type=int, default=100)
    parser.add_argument("--orders-per-hour", type=float, default=120.0)
    parser.add_argument("--sim-hours", type=float, default=4.0)
    parser.add_argument("--seeds", type=int, default=3)
    args = parser.parse_args(argv)

    def params(**kw):
        base = dict(
            nodes=args.nodes,
            avg_degree=6.0,
            restaurants=max(10, args.nodes // 25),
            vehicles=args.vehicles,
            orders_per_hour=args.orders_per_hour,
            sim_hours=args.sim_hours,
            sim_start_hour=10.0,
            hotspot_concentration=0.85,
        )
        base.update(kw)
        return workload.CityParams(**base)

    print("== cluster-target fraction f ==")
    print(f"{'f':>5} {'seed':>5} {'gini':>7} {'dtpo_min':>9} {'sla_pct':>8}")
    for f in (0.2, 0.5, 0.8):
        for seed in range(args.seeds):
            rep = simulate(params(seed=seed), f=f)
            print(
                f"{f:>5.1f} {seed:>5} {rep['gini']:>7.3f} "
                f"{rep['dtpo_minutes']:>9.2f} {rep['sla_violation_pct']:>8.2f}"
            )

    print("\n== fleet size ==")
    print(f"{'fleet':>6} {'seed':>5} {'gini':>7} {'dtpo_min':>9} {'sla_pct':>8}")
    for scale in (0.5, 1.0, 1.5):
        fleet = max(1, round(args.vehicles * scale))
        for seed in range(args.seeds):
            rep = simulate(params(vehicles=fleet, seed=seed))
            print(
                f"{fleet:>6} {seed:>5} {rep['gini']:>7.3f} "
                f"{rep['dtpo_minutes']:>9.2f} {rep['sla_violation_pct']:>8.2f}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())
