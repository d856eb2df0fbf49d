"""Per-window order allocation.

Clusters pending orders, builds a vehicle x cluster bipartite problem with
range-based forbidden edges, and solves a minimum-weight maximum matching.
Three weight schemes share the machinery: the fairness weights
(next-slot income relative to the fleet's minimum income), a pure
delivery-time greedy, and a lambda-blend of the two.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import dispatch
from .dispatch import PaymentParams

# Greedy lexicographic tie-break refinement is quadratic in solver calls;
# above this cell count ties are broken by solver determinism instead.
LEX_REFINE_MAX_CELLS = 400


@dataclass
class AllocatorConfig:
    gamma: float = 2.0
    f: float = 0.8  # clustering target fraction of the fleet
    eta: float = 600.0  # max acceptable merge increment, seconds
    pay: PaymentParams = field(default_factory=PaymentParams)
    max_o: int = 3
    omega: float = 7200.0  # rejection penalty / time-weight normalizer, seconds
    merge_increment: str = "max"  # or "sum"
    threads: int = 1  # workers for weight-matrix population

    def __post_init__(self):
        if self.gamma <= 1:
            raise ValueError("gamma must be > 1")
        if not (0 < self.f <= 1):
            raise ValueError("f must be in (0, 1]")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.merge_increment not in ("max", "sum"):
            raise ValueError("merge_increment must be 'max' or 'sum'")


@dataclass
class OrderCluster:
    orders: list  # of Order, sorted by id
    anchor: int  # restaurant of the first pickup in the internal best plan
    cached_cost: float

    @property
    def order_ids(self):
        return [o.id for o in self.orders]


@dataclass
class BipartiteProblem:
    vehicles: list  # of Vehicle, sorted by id
    clusters: list  # of OrderCluster
    weight: np.ndarray  # vehicles x clusters
    forbidden: np.ndarray  # bool, same shape
    near_dist: list  # per cluster
    dist: np.ndarray  # vehicle->anchor distance, inf when out of range


@dataclass
class Matching:
    pairs: list  # of (vehicle_id, cluster_index)
    unassigned_clusters: list


@dataclass
class Assignment:
    vehicle: object  # Vehicle
    cluster: OrderCluster
    near_dist: float
    dist: float


def _internal_plan_cost(orders, t, net):
    """(cost, anchor) of serving `orders` with one vehicle that starts at
    the first restaurant of whichever stop ordering is quickest."""
    pickups = [dispatch.Stop(o.restaurant, dispatch.PICKUP, o.id) for o in orders]
    dropoffs = [dispatch.Stop(o.customer, dispatch.DROPOFF, o.id) for o in orders]
    ready_at = {o.id: o.ready_at for o in orders}
    best = None
    for seq in dispatch._precedence_sequences(pickups, dropoffs):
        timeline = dispatch._evaluate_timeline(seq[0].node, t, seq, net, ready_at)
        if timeline is None:
            continue
        key = (timeline[-1].arrive - t, tuple((s.order_id, s.kind) for s in seq))
        if best is None or key < best[0]:
            best = (key, seq[0].node)
    if best is None:
        return math.inf, orders[0].restaurant
    return best[0][0], best[1]


def _make_cluster(orders, t, net):
    orders = sorted(orders, key=lambda o: o.id)
    cost, anchor = _internal_plan_cost(orders, t, net)
    return OrderCluster(orders, anchor, cost)


def cluster_orders(orders, n_vehicles, cfg, t, net):
    """Agglomerate pending orders into clusters of size <= max_o.

    Below f * n_vehicles orders, every order stays a singleton. Otherwise
    the pair whose combined single-vehicle plan costs the least extra time
    is merged repeatedly, until the cluster count reaches f * n_vehicles or
    the cheapest merge increment exceeds eta.
    """
    orders = sorted(orders, key=lambda o: o.id)
    clusters = [_make_cluster([o], t, net) for o in orders]
    target = cfg.f * n_vehicles
    if len(clusters) <= target:
        return clusters

    merged_cost_cache = {}

    def merge_cost(i, j):
        key = (tuple(clusters[i].order_ids), tuple(clusters[j].order_ids))
        if key not in merged_cost_cache:
            merged_cost_cache[key] = _internal_plan_cost(
                sorted(clusters[i].orders + clusters[j].orders, key=lambda o: o.id),
                t,
                net,
            )[0]
        return merged_cost_cache[key]

    while len(clusters) > max(target, 1):
        best = None
        for i, j in itertools.combinations(range(len(clusters)), 2):
            if len(clusters[i].orders) + len(clusters[j].orders) > cfg.max_o:
                continue
            union = merge_cost(i, j)
            if math.isinf(union):
                continue
            if cfg.merge_increment == "max":
                inc = union - max(clusters[i].cached_cost, clusters[j].cached_cost)
            else:
                inc = union - (clusters[i].cached_cost + clusters[j].cached_cost)
            key = (inc, i, j)
            if best is None or key < best:
                best = key
        if best is None or best[0] > cfg.eta:
            break
        _, i, j = best
        merged = _make_cluster(clusters[i].orders + clusters[j].orders, t, net)
        clusters = (
            clusters[:i] + [merged] + clusters[i + 1 : j] + clusters[j + 1 :]
        )
    return clusters


def _pair_weight(vehicle, cluster, t, net, cfg, kind, min_inc, lam):
    if kind == "fairfoody":
        return dispatch.ns_income(vehicle, cluster.orders, t, net, cfg.pay) - min_inc
    if kind == "aodt":
        return dispatch.aodt(cluster.orders, vehicle, t, net)
    if kind == "weighted":
        w_fair = (
            dispatch.ns_income(vehicle, cluster.orders, t, net, cfg.pay) - min_inc
        )
        w_time = dispatch.aodt(cluster.orders, vehicle, t, net) / cfg.omega
        return lam * w_fair + (1.0 - lam) * w_time
    raise ValueError(f"unknown weight kind {kind!r}")


def build_bipartite(vehicles, clusters, cfg, t, net, kind="fairfoody", lam=1.0):
    """Vehicle x cluster weight matrix with out-of-range pairs forbidden.

    For each cluster, a best-first search from its anchor finds the nearest
    vehicle; only vehicles within gamma * near_dist (and with enough spare
    capacity) get finite weights, all others are forbidden.
    """
    vehicles = sorted(vehicles, key=lambda v: v.id)
    n, m = len(vehicles), len(clusters)
    weight = np.zeros((n, m))
    forbidden = np.ones((n, m), dtype=bool)
    dist = np.full((n, m), math.inf)
    near_dists = []

    loc_map = {}
    row = {v.id: i for i, v in enumerate(vehicles)}
    for v in vehicles:
        loc_map.setdefault(v.location, []).append(v.id)

    min_inc = min(
        (dispatch.income_or_zero(v, cfg.pay) for v in vehicles), default=0.0
    )

    def column(cluster):
        # read-only over vehicles and the (locked) net cache, so safe to
        # evaluate concurrently; results are written back per column index
        near, reachable = net.range_search_vehicles(
            cluster.anchor, t, cfg.gamma, loc_map
        )
        entries = []
        for vid, d in reachable:
            i = row[vid]
            v = vehicles[i]
            if v.remaining_capacity < len(cluster.orders):
                continue
            try:
                w = _pair_weight(v, cluster, t, net, cfg, kind, min_inc, lam)
            except dispatch.InfeasiblePlanError:
                continue
            if math.isinf(w):
                continue
            entries.append((i, w, d))
        return near, entries

    if cfg.threads > 1 and len(clusters) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            columns = list(pool.map(column, clusters))
    else:
        columns = [column(c) for c in clusters]

    for j, (near, entries) in enumerate(columns):
        near_dists.append(near)
        for i, w, d in entries:
            weight[i, j] = w
            forbidden[i, j] = False
            dist[i, j] = d

    return BipartiteProblem(vehicles, clusters, weight, forbidden, near_dists, dist)


def _assignment_value(weight, forbidden, big):
    """(cardinality, total weight) of the min-weight max matching on the
    non-forbidden edges, plus the raw scipy row/col solution.

    `big` replaces forbidden entries; it must dominate any achievable
    difference of real-edge sums, so assignments with more real edges
    always win and among those the cheapest real sum wins.
    """
    cost = np.where(forbidden, big, weight)
    rows, cols = linear_sum_assignment(cost)
    real = ~forbidden[rows, cols]
    return int(real.sum()), float(weight[rows[real], cols[real]].sum()), rows, cols


def _values_equal(a, b):
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)


def solve_matching(problem):
    """Minimum-total-weight maximum matching over non-forbidden edges.

    Forbidden edges carry a cost large enough that the solver only uses
    them when no real edge is available; such pairs are reported as
    unassigned. On small problems, ties between equal-weight optima are
    broken toward the lexicographically smallest (vehicle id, cluster
    index) sequence.
    """
    weight, forbidden = problem.weight, problem.forbidden
    n, m = weight.shape
    if n == 0 or m == 0 or forbidden.all():
        return Matching([], list(range(m)))

    max_abs = float(np.abs(weight[~forbidden]).max())
    big = 2.0 * max_abs * (min(n, m) + 1) + 1.0

    if n * m <= LEX_REFINE_MAX_CELLS:
        pairs = _lexicographic_solution(weight, forbidden, big)
    else:
        _, _, rows, cols = _assignment_value(weight, forbidden, big)
        pairs = sorted(
            (int(i), int(j))
            for i, j in zip(rows, cols)
            if not forbidden[i, j]
        )
    matched_cols = {j for _, j in pairs}
    return Matching(
        [(problem.vehicles[i].id, j) for i, j in pairs],
        [j for j in range(m) if j not in matched_cols],
    )


def _lexicographic_solution(weight, forbidden, big):
    """Greedy row-by-row refinement to the lexicographically smallest
    optimal matching. Exact but O(rows * cols) solver calls."""
    n, m = weight.shape
    rows_left = list(range(n))
    cols_left = list(range(m))

    def value(rr, cc):
        if not rr or not cc:
            return 0, 0.0
        k, w, _, _ = _assignment_value(
            weight[np.ix_(rr, cc)], forbidden[np.ix_(rr, cc)], big
        )
        return k, w

    k_star, w_star = value(rows_left, cols_left)
    pairs = []
    for i in list(rows_left):
        rest_rows = [r for r in rows_left if r != i]
        fixed = None
        for j in cols_left:
            if forbidden[i, j]:
                continue
            rest_cols = [c for c in cols_left if c != j]
            k, w = value(rest_rows, rest_cols)
            if k == k_star - 1 and _values_equal(w + weight[i, j], w_star):
                fixed = j
                break
        if fixed is not None:
            pairs.append((i, fixed))
            rows_left.remove(i)
            cols_left.remove(fixed)
            k_star -= 1
            w_star -= weight[i, fixed]
        else:
            rows_left.remove(i)
    return pairs


def _eligible_vehicles(state, t):
    return sorted(
        (
            v
            for v in state.vehicles
            if v.on_duty(t) and v.remaining_capacity >= 1
        ),
        key=lambda v: v.id,
    )


def _allocate(state, pending, cfg, t, kind, lam=1.0):
    pending = [o for o in pending if o.status == dispatch.PENDING]
    vehicles = _eligible_vehicles(state, t)
    if not pending or not vehicles:
        return []
    clusters = cluster_orders(pending, len(vehicles), cfg, t, state.net)
    problem = build_bipartite(vehicles, clusters, cfg, t, state.net, kind, lam)
    matching = solve_matching(problem)
    row = {v.id: i for i, v in enumerate(problem.vehicles)}
    out = []
    for vid, j in matching.pairs:
        i = row[vid]
        out.append(
            Assignment(
                problem.vehicles[i],
                problem.clusters[j],
                problem.near_dist[j],
                float(problem.dist[i, j]),
            )
        )
    return out


def allocate_fairfoody(state, pending, cfg, t):
    """Fairness-weighted matching: cluster, weigh by next-slot income gap,
    match minimum weight. Unmatched clusters stay pending."""
    return _allocate(state, pending, cfg, t, "fairfoody")


def allocate_greedy_edt(state, pending, cfg, t):
    """Delivery-time greedy baseline: same machinery, AODT weights."""
    return _allocate(state, pending, cfg, t, "aodt")


def allocate_weighted(state, pending, cfg, t, lam):
    """Blend of fairness and (omega-normalized) delivery-time weights."""
    if not (0.0 <= lam <= 1.0):
        raise ValueError("lambda must be in [0, 1]")
    return _allocate(state, pending, cfg, t, "weighted", lam)
