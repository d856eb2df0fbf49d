"""Fairness and efficiency metrics computed from an event log.

Everything here is a pure function over an immutable EventLog (plus node
coordinates for the spatial metrics). Income vectors exclude vehicles that
never accrued available time, where the income rate is undefined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LUNCH = (11 * 3600, 14 * 3600)
DINNER = (19 * 3600, 23 * 3600)
SECONDS_PER_DAY = 86400


class MetricUndefinedError(ValueError):
    """Raised when a metric's preconditions are not met (e.g. no deliveries)."""


@dataclass
class GridSpec:
    min_x: float
    max_x: float
    min_y: float
    max_y: float
    resolution: int = 32

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")
        if not (self.max_x > self.min_x and self.max_y > self.min_y):
            raise ValueError("bounding box is degenerate")

    @classmethod
    def for_network(cls, net, resolution=32):
        return cls(
            float(net.xs.min()),
            float(net.xs.max()) + 1e-9,
            float(net.ys.min()),
            float(net.ys.max()) + 1e-9,
            resolution,
        )

    def cell_of(self, x, y):
        r = self.resolution
        cx = min(r - 1, int((x - self.min_x) / (self.max_x - self.min_x) * r))
        cy = min(r - 1, int((y - self.min_y) / (self.max_y - self.min_y) * r))
        return max(0, cx), max(0, cy)


def gini(x):
    """Mean absolute pairwise difference over 2 * n * sum. 0 on a zero vector."""
    x = np.asarray(list(x), dtype=float)
    if x.size < 1:
        raise MetricUndefinedError("gini needs at least one value")
    total = x.sum()
    if total <= 0:
        return 0.0
    diffs = np.abs(x[:, None] - x[None, :]).sum()
    return float(diffs / (2 * x.size * total))


def income_gap(x, per_hour=True):
    """max - min of the income rates; reported per hour by default."""
    x = np.asarray(list(x), dtype=float)
    if x.size < 1:
        raise MetricUndefinedError("income_gap needs at least one value")
    gap = float(x.max() - x.min())
    return gap * 3600.0 if per_hour else gap


def lorenz_points(x):
    """Cumulative (population share, income share) points, (0,0) to (1,1)."""
    x = np.sort(np.asarray(list(x), dtype=float))
    total = x.sum()
    if total <= 0:
        raise MetricUndefinedError("lorenz curve needs positive total income")
    cum = np.cumsum(x) / total
    pts = [(0.0, 0.0)]
    n = x.size
    pts.extend(((i + 1) / n, float(cum[i])) for i in range(n))
    return pts


def income_vector(log):
    """Per-vehicle time-normalized income rates, aT = 0 vehicles excluded.

    Returns {vehicle_id: rate}; payment weights come from the log's meta
    record.
    """
    meta = _meta(log)
    w1, w2 = meta["w1"], meta["w2"]
    out = {}
    for rec in log.of_type("vehicle_summary"):
        at = rec["available_s"]
        if at > 0:
            out[rec["vehicle"]] = (w1 * rec["drive_s"] + w2 * rec["wait_s"]) / at
    return out


def _meta(log):
    metas = log.of_type("meta")
    if not metas:
        raise MetricUndefinedError("log has no meta record")
    return metas[0]


def _order_spans(log):
    placed = {r["order"]: r for r in log.of_type("order_placed")}
    delivered = {r["order"]: r for r in log.of_type("delivered")}
    rejected = {r["order"] for r in log.of_type("rejected")}
    return placed, delivered, rejected


def dtpo(log):
    """Mean delivery duration over delivered orders, minutes."""
    placed, delivered, _ = _order_spans(log)
    if not delivered:
        raise MetricUndefinedError("no delivered orders")
    durations = [r["t"] - placed[oid]["t"] for oid, r in delivered.items()]
    return float(np.mean(durations)) / 60.0


def sla_violations(log, threshold):
    """Percentage of orders delivered late (duration > threshold) or rejected."""
    placed, delivered, rejected = _order_spans(log)
    if not placed:
        raise MetricUndefinedError("no orders")
    bad = set(rejected)
    for oid, r in delivered.items():
        if r["t"] - placed[oid]["t"] > threshold:
            bad.add(oid)
    return 100.0 * len(bad) / len(placed)


def _ranked_vehicles(log):
    """Vehicle ids sorted by income ascending, ties by id."""
    inc = income_vector(log)
    return sorted(inc, key=lambda vid: (inc[vid], vid)), inc


def _quartile_groups(log):
    ranked, inc = _ranked_vehicles(log)
    n = len(ranked)
    if n < 8:
        raise MetricUndefinedError("need at least 8 vehicles with income")
    q = n // 4
    return ranked[:q], ranked[-q:]  # bottom, top


def spatial_distance(log, grid, prop, net):
    """Total variation distance between the grid histograms of top-25% and
    bottom-25% earners for one event property.

    prop: 'vehicle_loc' (vehicle position at assignment), 'restaurant', or
    'customer' (pickup / dropoff nodes of assigned orders).
    """
    if prop not in ("vehicle_loc", "restaurant", "customer"):
        raise ValueError(f"unknown property {prop!r}")
    bottom, top = _quartile_groups(log)
    placed = {r["order"]: r for r in log.of_type("order_placed")}

    def nodes_for(vids):
        vids = set(vids)
        nodes = []
        for rec in log.of_type("assigned"):
            if rec["vehicle"] not in vids:
                continue
            if prop == "vehicle_loc":
                nodes.append(rec["vehicle_location"])
            elif prop == "restaurant":
                nodes.append(placed[rec["order"]]["restaurant"])
            else:
                nodes.append(placed[rec["order"]]["customer"])
        return nodes

    alpha = _grid_histogram(nodes_for(top), grid, net)
    beta = _grid_histogram(nodes_for(bottom), grid, net)
    return float(0.5 * np.abs(alpha - beta).sum()), alpha, beta


def _grid_histogram(nodes, grid, net):
    h = np.zeros((grid.resolution, grid.resolution))
    for nid in nodes:
        x, y = net.coords(nid)
        cx, cy = grid.cell_of(x, y)
        h[cx, cy] += 1
    total = h.sum()
    return h / total if total > 0 else h


def order_count_percentiles(log, percentiles, method="nearest"):
    """Delivered-order counts per vehicle, ranked by income, sampled at the
    requested percentiles. Nearest-rank by default; 'linear' interpolates."""
    ranked, _ = _ranked_vehicles(log)
    if not ranked:
        raise MetricUndefinedError("no vehicles with income")
    counts = {r["vehicle"]: r.get("delivered", 0) for r in log.of_type("vehicle_summary")}
    series = [counts.get(vid, 0) for vid in ranked]
    n = len(series)
    out = {}
    for p in percentiles:
        if method == "nearest":
            idx = max(1, math.ceil(p / 100.0 * n)) - 1
            out[p] = series[min(idx, n - 1)]
        elif method == "linear":
            out[p] = float(np.percentile(series, p))
        else:
            raise ValueError(f"unknown percentile method {method!r}")
    return out


def _period_seconds(intervals):
    """On-duty seconds in (lunch, dinner, other), folding over days."""
    lunch = dinner = total = 0.0
    for on, off in intervals:
        total += off - on
        t = on
        while t < off:
            day = math.floor(t / SECONDS_PER_DAY) * SECONDS_PER_DAY
            chunk_end = min(off, day + SECONDS_PER_DAY)
            for lo, hi, which in (
                (LUNCH[0], LUNCH[1], "lunch"),
                (DINNER[0], DINNER[1], "dinner"),
            ):
                ov = max(0.0, min(chunk_end, day + hi) - max(t, day + lo))
                if which == "lunch":
                    lunch += ov
                else:
                    dinner += ov
            t = chunk_end
    return lunch, dinner, max(0.0, total - lunch - dinner)


def period_histogram(log):
    """Fractions of on-duty time in lunch / dinner / other, for the top-25%
    and bottom-25% earners."""
    bottom, top = _quartile_groups(log)
    ons = {}
    for rec in log.of_type("duty_on"):
        ons.setdefault(rec["vehicle"], []).append(rec["t"])
    offs = {}
    for rec in log.of_type("duty_off"):
        offs.setdefault(rec["vehicle"], []).append(rec["t"])

    def fractions(vids):
        ivs = []
        for vid in vids:
            ivs.extend(zip(sorted(ons.get(vid, [])), sorted(offs.get(vid, []))))
        lunch, dinner, other = _period_seconds(ivs)
        total = lunch + dinner + other
        if total <= 0:
            raise MetricUndefinedError("no duty time logged")
        return lunch / total, dinner / total, other / total

    return {"top": fractions(top), "bottom": fractions(bottom)}


def window_stats(log):
    """Mean/max allocation wall-clock and the share of overflown windows."""
    windows = log.of_type("window")
    active = [w for w in windows if w["pending"] > 0]
    walls = [w["wall_clock_s"] for w in active] or [0.0]
    overflow = [w for w in windows if w.get("overflow")]
    return {
        "mean_window_wall_clock_s": float(np.mean(walls)),
        "max_window_wall_clock_s": float(np.max(walls)),
        "overflow_pct": 100.0 * len(overflow) / len(windows) if windows else 0.0,
    }


def compute_report(log, net, grid_resolution=32, percentiles=(25, 50, 75, 95)):
    """All scalar metrics plus plot-ready sidecar tables.

    Returns (metrics dict, sidecars dict). Sidecars map filename to a list
    of CSV rows (first row is the header).
    """
    meta = _meta(log)
    inc = income_vector(log)
    rates = list(inc.values())
    placed, delivered, rejected = _order_spans(log)

    report = {
        "allocator": meta["allocator"],
        "n_vehicles": len(log.of_type("vehicle_summary")),
        "n_vehicles_with_income": len(rates),
        "total_orders": len(placed),
        "delivered": len(delivered),
        "rejected": len(rejected),
    }
    report["gini"] = gini(rates) if rates else None
    report["income_gap_per_hour"] = income_gap(rates) if rates else None
    report["dtpo_minutes"] = dtpo(log) if delivered else None
    report["sla_violation_pct"] = sla_violations(log, meta["sla"]) if placed else None
    report.update(window_stats(log))

    sidecars = {}
    if rates and sum(rates) > 0:
        sidecars["lorenz.csv"] = [("population_fraction", "income_fraction")] + [
            (f"{p:.10g}", f"{s:.10g}") for p, s in lorenz_points(rates)
        ]
    try:
        pct = order_count_percentiles(log, percentiles)
        sidecars["percentiles.csv"] = [("percentile", "orders")] + [
            (str(p), f"{c:g}") for p, c in pct.items()
        ]
    except MetricUndefinedError:
        pass

    grid = GridSpec.for_network(net, grid_resolution)
    for prop, label in (
        ("vehicle_loc", "vehicle"),
        ("restaurant", "restaurant"),
        ("customer", "customer"),
    ):
        try:
            psi, alpha, beta = spatial_distance(log, grid, prop, net)
        except MetricUndefinedError:
            report[f"psi_{label}"] = None
            continue
        report[f"psi_{label}"] = psi
        rows = [("cell_x", "cell_y", "alpha", "beta")]
        for cx in range(grid.resolution):
            for cy in range(grid.resolution):
                a, b = alpha[cx, cy], beta[cx, cy]
                if a or b:
                    rows.append((str(cx), str(cy), f"{a:.10g}", f"{b:.10g}"))
        sidecars[f"heatmap_{label}.csv"] = rows

    try:
        ph = period_histogram(log)
        rows = [("group", "lunch", "dinner", "other")]
        for group in ("top", "bottom"):
            rows.append((group,) + tuple(f"{x:.10g}" for x in ph[group]))
        sidecars["period_histogram.csv"] = rows
    except MetricUndefinedError:
        pass

    return report, sidecars
