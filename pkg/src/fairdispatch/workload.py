"""Seeded synthetic city generator and workload bundle I/O.

A workload bundle is a directory of CSVs (nodes, edges, restaurants,
vehicles, orders) plus a manifest with the generation parameters. The
generator produces a connected planar-ish road network, hotspot-skewed
restaurant placement, a fleet with duty shifts covering the horizon, and a
non-homogeneous Poisson order stream with lunch/dinner peaks.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .dispatch import Order, Vehicle
from .roadnet import RoadNetwork, SLOTS, load_network

FORMAT_VERSION = 1

PEAK_HOURS = set(range(11, 14)) | set(range(19, 23))
BASE_SPEED_MPS = 8.0
PEAK_SLOWDOWN = 1.3
MIN_PREP_S = 60.0
HOTSPOT_WEIGHT_BOOST = 8.0


class WorkloadFormatError(ValueError):
    pass


class GenerationError(RuntimeError):
    pass


@dataclass
class CityParams:
    nodes: int = 600
    avg_degree: float = 4.0
    restaurants: int = 40
    vehicles: int = 50
    orders_per_hour: float = 60.0
    peak_multiplier: float = 2.5
    hotspot_count: int = 3
    hotspot_concentration: float = 0.7
    sim_hours: float = 8.0
    sim_start_hour: float = 10.0
    prep_time_mean: float = 480.0
    prep_time_std: float = 180.0
    customer_radius: float = 1500.0  # max restaurant-to-customer crow-fly meters
    seed: int = 0

    def __post_init__(self):
        if min(self.nodes, self.restaurants, self.vehicles) < 1:
            raise ValueError("counts must be >= 1")
        if self.orders_per_hour <= 0 or self.sim_hours <= 0:
            raise ValueError("rates and horizon must be > 0")
        if self.hotspot_concentration < 0:
            raise ValueError("hotspot_concentration must be >= 0")

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass
class Workload:
    net: RoadNetwork
    restaurants: list  # node ids
    vehicles: list  # of Vehicle
    orders: list  # of Order, sorted by placed_at
    manifest: dict = field(default_factory=dict)


def _build_network(params, rng):
    n = params.nodes
    side = 200.0 * math.sqrt(n)
    radius = math.sqrt(params.avg_degree * side * side / (math.pi * n))
    pos = {i: (rng.uniform(0, side), rng.uniform(0, side)) for i in range(n)}
    g = nx.random_geometric_graph(n, radius, pos=pos)
    components = sorted(nx.connected_components(g), key=len, reverse=True)
    if not components or len(components[0]) < 2:
        raise GenerationError("giant component too small; raise avg_degree")
    keep = sorted(components[0])
    relabel = {old: i + 1 for i, old in enumerate(keep)}

    node_ids = [relabel[old] for old in keep]
    xs = [pos[old][0] for old in keep]
    ys = [pos[old][1] for old in keep]

    edge_list, weights = [], []
    for u, v in sorted(g.edges()):
        if u not in relabel or v not in relabel:
            continue
        (x1, y1), (x2, y2) = pos[u], pos[v]
        dist = math.hypot(x2 - x1, y2 - y1)
        base = max(1.0, dist / BASE_SPEED_MPS)
        for a, b in ((relabel[u], relabel[v]), (relabel[v], relabel[u])):
            jitter = rng.uniform(0.9, 1.1)
            slot_w = [
                max(
                    1.0,
                    round(base * jitter * (PEAK_SLOWDOWN if h in PEAK_HOURS else 1.0)),
                )
                for h in range(SLOTS)
            ]
            edge_list.append((a, b))
            weights.append(slot_w)
    return RoadNetwork(node_ids, xs, ys, edge_list, np.array(weights, dtype=float))


def _skewed_nodes(count, prob, hotspots, net, rng, exclude=frozenset()):
    """Sample nodes near a random hotspot with probability `prob`, else
    uniformly, never landing on an excluded node. Returns (node ids,
    near-hotspot flags)."""
    allowed = np.array([n for n in net.node_ids if n not in exclude])
    if len(allowed) == 0:
        raise GenerationError("every node is excluded from placement")
    side = float(max(net.xs.max() - net.xs.min(), net.ys.max() - net.ys.min()))
    spread = max(200.0, side / 12.0)
    chosen, is_hot = [], []
    for _ in range(count):
        if rng.random() < prob and len(hotspots):
            center = hotspots[rng.integers(len(hotspots))]
            cx, cy = net.coords(int(center))
            for _attempt in range(8):
                nid = net.snap_to_node(
                    cx + rng.normal(0, spread), cy + rng.normal(0, spread)
                )
                if nid not in exclude:
                    break
            else:
                nid = int(allowed[rng.integers(len(allowed))])
            chosen.append(nid)
            is_hot.append(True)
        else:
            chosen.append(int(allowed[rng.integers(len(allowed))]))
            is_hot.append(False)
    return chosen, is_hot


def _make_orders(params, net, restaurants, is_hot, rng):
    start = params.sim_start_hour * 3600.0
    weights = np.array(
        [1.0 + HOTSPOT_WEIGHT_BOOST * params.hotspot_concentration if h else 1.0 for h in is_hot]
    )
    weights = weights / weights.sum()

    # candidate customers per restaurant: nodes within a euclidean radius.
    # Restaurant nodes are commercial-only, so customers never sit exactly
    # on a pickup point (of any restaurant).
    rest_set = frozenset(restaurants)
    cust_cache = {}

    def customers_near(rid):
        if rid not in cust_cache:
            x, y = net.coords(rid)
            d2 = (net.xs - x) ** 2 + (net.ys - y) ** 2
            cands = [
                net.node_ids[i]
                for i in np.flatnonzero(d2 <= params.customer_radius**2)
                if net.node_ids[i] not in rest_set
            ]
            if not cands:
                order_idx = np.argsort(d2)
                cands = [net.node_ids[i] for i in order_idx if net.node_ids[i] not in rest_set][:1]
            if not cands:
                raise GenerationError("no customer node available; every node hosts a restaurant")
            cust_cache[rid] = cands
        return cust_cache[rid]

    orders, times = [], []
    n_hours = math.ceil(params.sim_hours)
    for h in range(n_hours):
        hour_start = start + h * 3600.0
        hour_len = min(3600.0, params.sim_hours * 3600.0 - h * 3600.0)
        wall_hour = int((hour_start % 86400) // 3600)
        rate = params.orders_per_hour * (
            params.peak_multiplier if wall_hour in PEAK_HOURS else 1.0
        )
        count = rng.poisson(rate * hour_len / 3600.0)
        times.extend(hour_start + np.floor(rng.uniform(0, hour_len, size=count)))
    times.sort()

    for i, t in enumerate(times, start=1):
        rid = restaurants[rng.choice(len(restaurants), p=weights)]
        cust = customers_near(rid)[rng.integers(len(customers_near(rid)))]
        prep = max(MIN_PREP_S, round(rng.normal(params.prep_time_mean, params.prep_time_std)))
        orders.append(Order(i, rid, int(cust), float(t), float(prep)))
    return orders


def generate_city(params):
    """Deterministic synthetic city: (network, restaurant nodes, vehicles,
    orders sorted by placement time)."""
    rng = np.random.default_rng(params.seed)
    net = _build_network(params, rng)
    hotspots = rng.choice(
        np.array(net.node_ids),
        size=min(params.hotspot_count, net.n_nodes),
        replace=False,
    )
    restaurants, is_hot = _skewed_nodes(
        params.restaurants, params.hotspot_concentration, hotspots, net, rng
    )

    start = params.sim_start_hour * 3600.0
    end = start + params.sim_hours * 3600.0
    # drivers position themselves where demand is, so vehicle starts follow
    # the same hotspot mixture as restaurants — but off the commercial-only
    # restaurant nodes themselves
    starts_nodes, _ = _skewed_nodes(
        params.vehicles, params.hotspot_concentration, hotspots, net, rng,
        exclude=frozenset(restaurants),
    )
    vehicles = []
    for i, node in enumerate(starts_nodes, start=1):
        stagger = float(rng.integers(0, 300))
        vehicles.append(Vehicle(i, int(node), [(start + stagger, end)], capacity=3))

    orders = _make_orders(params, net, restaurants, is_hot, rng)
    return net, restaurants, vehicles, orders


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_workload(directory, net, restaurants, vehicles, orders, params=None):
    """Serialize a workload bundle; returns the manifest dict."""
    os.makedirs(directory, exist_ok=True)
    _write_csv(
        os.path.join(directory, "nodes.csv"),
        ["node_id", "x", "y"],
        [
            (nid, f"{net.xs[i]:.6f}", f"{net.ys[i]:.6f}")
            for i, nid in enumerate(net.node_ids)
        ],
    )
    _write_csv(
        os.path.join(directory, "edges.csv"),
        ["src", "dst"] + [f"w{i}" for i in range(SLOTS)],
        [
            [net.node_ids[e.src], net.node_ids[e.dst]]
            + [f"{w:g}" for w in net.weights[k]]
            for k, e in enumerate(net.edges)
        ],
    )
    _write_csv(
        os.path.join(directory, "restaurants.csv"), ["node_id"], [(r,) for r in restaurants]
    )
    _write_csv(
        os.path.join(directory, "vehicles.csv"),
        ["vehicle_id", "start_node", "duty_on_s", "duty_off_s", "capacity"],
        [
            (v.id, v.location, f"{v.duty_intervals[0][0]:g}", f"{v.duty_intervals[0][1]:g}", v.capacity)
            for v in vehicles
        ],
    )
    _write_csv(
        os.path.join(directory, "orders.csv"),
        ["order_id", "restaurant_node", "customer_node", "placed_at_s", "prep_time_s"],
        [
            (o.id, o.restaurant, o.customer, f"{o.placed_at:g}", f"{o.prep_time:g}")
            for o in orders
        ],
    )
    manifest = {
        "format_version": FORMAT_VERSION,
        "params": params.to_dict() if params is not None else None,
        "counts": {
            "nodes": net.n_nodes,
            "edges": net.n_edges,
            "restaurants": len(restaurants),
            "vehicles": len(vehicles),
            "orders": len(orders),
        },
    }
    with open(os.path.join(directory, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _read_rows(path, expected_header):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            rows = list(reader)
    except OSError as exc:
        raise WorkloadFormatError(f"{path}: {exc}") from None
    if not rows or [h.strip() for h in rows[0]] != expected_header:
        raise WorkloadFormatError(f"{path}: expected header {','.join(expected_header)}")
    return rows[1:]


def read_workload(directory):
    """Load a workload bundle written by write_workload."""
    manifest_path = os.path.join(directory, "manifest.json")
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise WorkloadFormatError(f"{manifest_path}: {exc}") from None
    if manifest.get("format_version") != FORMAT_VERSION:
        raise WorkloadFormatError(
            f"unsupported workload format version {manifest.get('format_version')!r}"
        )

    net = load_network(
        os.path.join(directory, "nodes.csv"), os.path.join(directory, "edges.csv")
    )
    restaurants = [
        int(row[0]) for row in _read_rows(os.path.join(directory, "restaurants.csv"), ["node_id"])
    ]
    vehicles = []
    for lineno, row in enumerate(
        _read_rows(
            os.path.join(directory, "vehicles.csv"),
            ["vehicle_id", "start_node", "duty_on_s", "duty_off_s", "capacity"],
        ),
        start=2,
    ):
        try:
            vehicles.append(
                Vehicle(
                    int(row[0]),
                    int(row[1]),
                    [(float(row[2]), float(row[3]))],
                    capacity=int(row[4]),
                )
            )
        except (ValueError, IndexError) as exc:
            raise WorkloadFormatError(f"vehicles.csv line {lineno}: {exc}") from None
    orders = []
    for lineno, row in enumerate(
        _read_rows(
            os.path.join(directory, "orders.csv"),
            ["order_id", "restaurant_node", "customer_node", "placed_at_s", "prep_time_s"],
        ),
        start=2,
    ):
        try:
            orders.append(
                Order(int(row[0]), int(row[1]), int(row[2]), float(row[3]), float(row[4]))
            )
        except (ValueError, IndexError) as exc:
            raise WorkloadFormatError(f"orders.csv line {lineno}: {exc}") from None
    orders.sort(key=lambda o: (o.placed_at, o.id))
    return Workload(net, restaurants, vehicles, orders, manifest)
