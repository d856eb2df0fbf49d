"""Command-line entry point: generate / simulate / compare / metrics.

Config precedence is flags > config file > defaults. Exit codes: 0 ok,
2 usage, 3 data/format, 4 internal.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

from . import metrics as metrics_mod
from . import simulator, workload
from .allocator import AllocatorConfig
from .dispatch import PaymentParams

TOOL_VERSION = "0.1.0"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4

SIM_DEFAULTS = {
    "delta": 180.0,
    "sla": 2700.0,
    "reject_after": 2700.0,
    "allocator": "fairfoody",
    "lam": 1.0,
    "gamma": 2.0,
    "f": 0.8,
    "eta": 600.0,
    "max_o": 3,
    "omega": 7200.0,
    "w1": 1.0,
    "w2": 0.8,
    "seed": 0,
    "perturb_fraction": 0.0,
    "perturb_inflation": 0.0,
    "grid_resolution": 32,
    "threads": 1,
}


class UsageError(ValueError):
    pass


def _manifest_hash(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, rows, provenance=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if provenance:
            fh.write(f"# workload_manifest_hash={provenance}\n")
        csv.writer(fh).writerows(rows)


def cmd_generate(args):
    fields = {}
    if args.params_file:
        with open(args.params_file, encoding="utf-8") as fh:
            fields.update(json.load(fh))
    for name in (
        "nodes",
        "avg_degree",
        "restaurants",
        "vehicles",
        "orders_per_hour",
        "peak_multiplier",
        "hotspot_count",
        "hotspot_concentration",
        "sim_hours",
        "sim_start_hour",
        "prep_time_mean",
        "prep_time_std",
        "seed",
    ):
        v = getattr(args, name)
        if v is not None:
            fields[name] = v
    try:
        params = workload.CityParams(**fields)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None

    net, restaurants, vehicles, orders = workload.generate_city(params)
    manifest = workload.write_workload(
        args.output, net, restaurants, vehicles, orders, params
    )
    print(f"wrote workload bundle to {args.output}")
    print(f"{'nodes':>14} {'edges':>8} {'restaurants':>12} {'vehicles':>9} {'orders':>8}")
    c = manifest["counts"]
    print(
        f"{c['nodes']:>14} {c['edges']:>8} {c['restaurants']:>12} "
        f"{c['vehicles']:>9} {c['orders']:>8}"
    )
    return EXIT_OK


def _merged_sim_config(args):
    merged = dict(SIM_DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(SIM_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_cfg)
    for name in SIM_DEFAULTS:
        v = getattr(args, name, None)
        if v is not None:
            merged[name] = v
    return merged


def run_simulation(workload_dir, merged, output_dir):
    bundle = workload.read_workload(workload_dir)
    net = bundle.net
    if merged["perturb_fraction"] > 0:
        net = simulator.perturb_travel_times(
            net, merged["perturb_fraction"], merged["perturb_inflation"], merged["seed"]
        )
    try:
        acfg = AllocatorConfig(
            gamma=merged["gamma"],
            f=merged["f"],
            eta=merged["eta"],
            pay=PaymentParams(merged["w1"], merged["w2"]),
            max_o=merged["max_o"],
            omega=merged["omega"],
            threads=merged["threads"],
        )
        cfg = simulator.SimConfig(
            delta=merged["delta"],
            sla=merged["sla"],
            reject_after=merged["reject_after"],
            allocator=merged["allocator"],
            lam=merged["lam"],
            allocator_cfg=acfg,
            seed=merged["seed"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    wl_hash = _manifest_hash(os.path.join(workload_dir, "manifest.json"))
    log = simulator.run(net, bundle.orders, bundle.vehicles, cfg)
    # hash is a pure function of the workload, so stamping the meta record
    # keeps replay byte-identity intact
    log.records[0]["workload_manifest_hash"] = wl_hash
    report, sidecars = metrics_mod.compute_report(
        log, net, grid_resolution=merged["grid_resolution"]
    )
    report["workload_manifest_hash"] = wl_hash
    report["tool_version"] = TOOL_VERSION

    os.makedirs(output_dir, exist_ok=True)
    log.to_ndjson(os.path.join(output_dir, "events.ndjson"))
    _write_json(os.path.join(output_dir, "metrics.json"), report)
    for name, rows in sidecars.items():
        _write_csv(os.path.join(output_dir, name), rows, provenance=wl_hash)
    _write_json(
        os.path.join(output_dir, "run_manifest.json"),
        {
            "workload": os.path.abspath(workload_dir),
            "workload_manifest_hash": wl_hash,
            "config": merged,
            "tool_version": TOOL_VERSION,
        },
    )
    return report


def cmd_simulate(args):
    merged = _merged_sim_config(args)
    report = run_simulation(args.workload, merged, args.output)
    for key, label in (
        ("gini", "Gini"),
        ("income_gap_per_hour", "Income gap (pay/h)"),
        ("dtpo_minutes", "DTPO (min)"),
        ("sla_violation_pct", "SLA-V (%)"),
        ("mean_window_wall_clock_s", "Mean window wall-clock (s)"),
        ("max_window_wall_clock_s", "Max window wall-clock (s)"),
        ("overflow_pct", "Overflown windows (%)"),
    ):
        v = report.get(key)
        print(f"{label:<28} {v if v is None else f'{v:.4f}'}")
    return EXIT_OK


COMPARE_METRICS = [
    ("gini", "Gini", min),
    ("income_gap_per_hour", "IncomeGap/h", min),
    ("dtpo_minutes", "DTPO_min", min),
    ("sla_violation_pct", "SLA-V_%", min),
    ("overflow_pct", "Overflow_%", min),
]


def cmd_compare(args):
    runs = []
    for d in args.runs:
        with open(os.path.join(d, "metrics.json"), encoding="utf-8") as fh:
            report = json.load(fh)
        runs.append((d, report))
    hashes = {r.get("workload_manifest_hash") for _, r in runs}
    if len(hashes) > 1:
        print("error: runs come from different workloads", file=sys.stderr)
        return EXIT_DATA

    rows = [["run", "allocator"] + [label for _, label, _ in COMPARE_METRICS]]
    best = {}
    for key, _, pick in COMPARE_METRICS:
        vals = [r.get(key) for _, r in runs if r.get(key) is not None]
        best[key] = pick(vals) if vals else None
    for d, r in runs:
        row = [os.path.basename(os.path.normpath(d)), r.get("allocator", "?")]
        for key, _, _ in COMPARE_METRICS:
            v = r.get(key)
            if v is None:
                row.append("-")
            else:
                mark = "*" if best[key] is not None and v == best[key] else ""
                row.append(f"{v:.4f}{mark}")
        rows.append(row)

    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        print("  ".join(str(c).ljust(w) for c, w in zip(r, widths)))
    if args.output:
        _write_csv(args.output, rows)
        print(f"wrote {args.output}")
    return EXIT_OK


def cmd_metrics(args):
    log = simulator.EventLog.from_ndjson(args.events)
    bundle = workload.read_workload(args.workload)
    report, sidecars = metrics_mod.compute_report(
        log, bundle.net, grid_resolution=args.grid_resolution or 32
    )
    wl_hash = _manifest_hash(os.path.join(args.workload, "manifest.json"))
    report["workload_manifest_hash"] = wl_hash
    report["tool_version"] = TOOL_VERSION
    os.makedirs(args.output, exist_ok=True)
    _write_json(os.path.join(args.output, "metrics.json"), report)
    for name, rows in sidecars.items():
        _write_csv(os.path.join(args.output, name), rows, provenance=wl_hash)
    print(f"wrote metrics to {args.output}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="fairdispatch",
        description="Fairness-aware food delivery dispatch simulator",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a synthetic workload bundle")
    g.add_argument("--params-file", help="JSON file of generator parameters")
    for name, typ in (
        ("nodes", int),
        ("avg-degree", float),
        ("restaurants", int),
        ("vehicles", int),
        ("orders-per-hour", float),
        ("peak-multiplier", float),
        ("hotspot-count", int),
        ("hotspot-concentration", float),
        ("sim-hours", float),
        ("sim-start-hour", float),
        ("prep-time-mean", float),
        ("prep-time-std", float),
        ("seed", int),
    ):
        g.add_argument(f"--{name}", type=typ, default=None)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="replay a workload under an allocator")
    s.add_argument("workload")
    s.add_argument("--config", help="JSON config file mirroring flag names")
    s.add_argument(
        "--allocator", choices=["fairfoody", "greedy_edt", "weighted"], default=None
    )
    s.add_argument("--lambda", dest="lam", type=float, default=None)
    for name, typ in (
        ("delta", float),
        ("sla", float),
        ("reject-after", float),
        ("gamma", float),
        ("f", float),
        ("eta", float),
        ("max-o", int),
        ("omega", float),
        ("w1", float),
        ("w2", float),
        ("seed", int),
        ("perturb-fraction", float),
        ("perturb-inflation", float),
        ("grid-resolution", int),
    ):
        s.add_argument(f"--{name}", type=typ, default=None)
    s.add_argument("--threads", type=int, default=None, help="weight-evaluation workers")
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="join metrics of runs on one workload")
    c.add_argument("runs", nargs="+")
    c.add_argument("-o", "--output", help="also write the table as CSV")
    c.set_defaults(func=cmd_compare)

    m = sub.add_parser("metrics", help="recompute metrics from an events.ndjson")
    m.add_argument("events")
    m.add_argument("--workload", required=True)
    m.add_argument("--grid-resolution", type=int, default=None)
    m.add_argument("-o", "--output", required=True)
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        workload.WorkloadFormatError,
        simulator.SimulationInputError,
        FileNotFoundError,
        json.JSONDecodeError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - top-level CLI guard
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
