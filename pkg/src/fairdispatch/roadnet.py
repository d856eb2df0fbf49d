"""Time-dependent road network with per-hour-slot edge weights.

The network is immutable after construction. Shortest-path queries freeze
the hour slot at query time: a query at time t uses slot(t) weights for the
whole path. Full single-source distance maps are cached per (source, slot),
so repeated queries within one allocation window are cheap.
"""

from __future__ import annotations

import csv
import heapq
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

INF = math.inf
SLOTS = 24
SECONDS_PER_DAY = 86400

# Bound used instead of gamma * 0 when the nearest vehicle sits on the
# source node itself (see range_search_vehicles).
ZERO_NEARDIST_EPSILON = 1.0


class NetworkFormatError(ValueError):
    """Malformed node/edge input (bad row, dangling endpoint, bad weight)."""


def time_slot(t):
    """Hour slot (0..23) containing timestamp t (seconds)."""
    return int((t % SECONDS_PER_DAY) // 3600)


@dataclass
class _Edge:
    src: int  # node index
    dst: int  # node index


class RoadNetwork:
    """Directed graph over planar nodes; each edge has 24 hourly weights."""

    def __init__(self, node_ids, xs, ys, edge_list, weights, cache_size=50000):
        """
        node_ids: list of integer node ids
        xs, ys:   coordinates in meters, same order as node_ids
        edge_list: list of (src_id, dst_id)
        weights:  array (n_edges, 24) of traversal seconds
        """
        if len(node_ids) < 1:
            raise NetworkFormatError("network must have at least one node")
        if len(set(node_ids)) != len(node_ids):
            raise NetworkFormatError("duplicate node ids")
        self.node_ids = list(node_ids)
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self._idx = {nid: i for i, nid in enumerate(self.node_ids)}

        self.weights = np.asarray(weights, dtype=float)
        if self.weights.shape != (len(edge_list), SLOTS):
            raise NetworkFormatError(
                f"weights shape {self.weights.shape} does not match "
                f"{len(edge_list)} edges x {SLOTS} slots"
            )
        if len(edge_list) and (
            not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0)
        ):
            raise NetworkFormatError("edge weights must be finite and > 0")

        self.edges = []
        self.out_adj = [[] for _ in self.node_ids]
        self.in_adj = [[] for _ in self.node_ids]
        for k, (u, v) in enumerate(edge_list):
            if u not in self._idx or v not in self._idx:
                raise NetworkFormatError(f"edge ({u}, {v}) references unknown node")
            if u == v:
                raise NetworkFormatError(f"self-loop on node {u}")
            ui, vi = self._idx[u], self._idx[v]
            self.edges.append(_Edge(ui, vi))
            self.out_adj[ui].append(k)
            self.in_adj[vi].append(k)

        self._cache = OrderedDict()  # (source_idx, slot, reverse) -> dist array
        self._cache_size = cache_size
        self._cache_lock = threading.Lock()  # queries may fan out to workers

    @property
    def n_nodes(self):
        return len(self.node_ids)

    @property
    def n_edges(self):
        return len(self.edges)

    def node_index(self, node_id):
        try:
            return self._idx[node_id]
        except KeyError:
            raise NetworkFormatError(f"unknown node id {node_id}") from None

    def coords(self, node_id):
        i = self.node_index(node_id)
        return self.xs[i], self.ys[i]

    def edge_time(self, edge_index, t):
        """Traversal seconds of an edge at timestamp t."""
        return float(self.weights[edge_index, time_slot(t)])

    def _dijkstra(self, source_idx, slot, reverse=False):
        key = (source_idx, slot, reverse)
        with self._cache_lock:
            cached = self._cache.get(key)
            if cached is not None:
                self._cache.move_to_end(key)
                return cached
        dist = np.full(self.n_nodes, INF)
        dist[source_idx] = 0.0
        adj = self.in_adj if reverse else self.out_adj
        w = self.weights[:, slot]
        heap = [(0.0, source_idx)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for k in adj[u]:
                e = self.edges[k]
                v = e.src if reverse else e.dst
                nd = d + w[k]
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        with self._cache_lock:
            self._cache[key] = dist
            if len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return dist

    def shortest_path_time(self, u, v, t):
        """Quickest travel time u -> v with weights frozen at slot(t).

        Returns 0 for u == v and math.inf when v is unreachable.
        """
        ui, vi = self.node_index(u), self.node_index(v)
        if ui == vi:
            return 0.0
        return float(self._dijkstra(ui, time_slot(t))[vi])

    def range_search_vehicles(self, source, t, gamma, vehicle_locations):
        """Best-first search for vehicles near a pickup node.

        Expands from `source` over *incoming* edges (vehicle-to-source travel
        time) in non-decreasing distance order. near_dist is the distance of
        the first node hosting a vehicle; every vehicle within
        gamma * near_dist is returned. A zero near_dist (vehicle on the
        source node) would degenerate to a single candidate, so the bound
        falls back to gamma * ZERO_NEARDIST_EPSILON.

        vehicle_locations: {node_id: iterable of vehicle ids}
        Returns (near_dist, [(vehicle_id, dist), ...]) sorted by (dist, id).
        """
        if gamma <= 1:
            raise ValueError("gamma must be > 1")
        by_idx = {}
        for nid, vids in vehicle_locations.items():
            vids = list(vids)
            if vids:
                by_idx[self.node_index(nid)] = vids
        if not by_idx:
            return INF, []

        slot = time_slot(t)
        src = self.node_index(source)
        w = self.weights[:, slot]
        dist = {src: 0.0}
        heap = [(0.0, src)]
        visited = set()
        near_dist = None
        found = []
        while heap:
            d, u = heapq.heappop(heap)
            if u in visited:
                continue
            if near_dist is not None and d > gamma * max(near_dist, ZERO_NEARDIST_EPSILON):
                break
            visited.add(u)
            if u in by_idx:
                if near_dist is None:
                    near_dist = d
                for vid in by_idx[u]:
                    found.append((vid, d))
            for k in self.in_adj[u]:
                v = self.edges[k].src
                nd = d + w[k]
                if nd < dist.get(v, INF):
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
        if near_dist is None:
            return INF, []
        found.sort(key=lambda pair: (pair[1], str(pair[0])))
        return near_dist, found

    def snap_to_node(self, x, y):
        """Nearest node by Euclidean distance; ties go to the smallest id."""
        d2 = (self.xs - x) ** 2 + (self.ys - y) ** 2
        best = np.flatnonzero(d2 == d2.min())
        return min(self.node_ids[i] for i in best)

    def with_weights(self, weights):
        """Copy of this network with a replaced weight matrix."""
        edge_list = [
            (self.node_ids[e.src], self.node_ids[e.dst]) for e in self.edges
        ]
        return RoadNetwork(self.node_ids, self.xs, self.ys, edge_list, weights)


def _read_csv_rows(source, expected_header, what):
    if hasattr(source, "read"):
        reader = csv.reader(source)
    else:
        reader = csv.reader(open(source, newline="", encoding="utf-8"))
    rows = list(reader)
    if not rows:
        raise NetworkFormatError(f"{what} file is empty")
    header = [h.strip() for h in rows[0]]
    if header[: len(expected_header)] != expected_header:
        raise NetworkFormatError(
            f"{what} header must start with {','.join(expected_header)}"
        )
    return rows[1:]


def load_network(node_source, edge_source):
    """Build a RoadNetwork from node and edge CSVs.

    Node file: node_id,x,y. Edge file: src,dst,w0..w23 (seconds per hour
    slot). Both need a header row. Raises NetworkFormatError with the
    offending line number on malformed input.
    """
    node_ids, xs, ys = [], [], []
    for lineno, row in enumerate(_read_csv_rows(node_source, ["node_id", "x", "y"], "node"), start=2):
        if not row or not "".join(row).strip():
            continue
        try:
            node_ids.append(int(row[0]))
            xs.append(float(row[1]))
            ys.append(float(row[2]))
        except (ValueError, IndexError) as exc:
            raise NetworkFormatError(f"node file line {lineno}: {exc}") from None

    edge_list, weights = [], []
    header = ["src", "dst"] + [f"w{i}" for i in range(SLOTS)]
    for lineno, row in enumerate(_read_csv_rows(edge_source, header[:2], "edge"), start=2):
        if not row or not "".join(row).strip():
            continue
        try:
            src, dst = int(row[0]), int(row[1])
            slot_w = [float(x) for x in row[2 : 2 + SLOTS]]
            if len(slot_w) != SLOTS:
                raise ValueError(f"expected {SLOTS} slot weights, got {len(slot_w)}")
        except (ValueError, IndexError) as exc:
            raise NetworkFormatError(f"edge file line {lineno}: {exc}") from None
        edge_list.append((src, dst))
        weights.append(slot_w)

    weights = np.asarray(weights, dtype=float).reshape(len(edge_list), SLOTS)
    return RoadNetwork(node_ids, xs, ys, edge_list, weights)
