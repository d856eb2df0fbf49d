"""Deterministic windowed discrete-event dispatch engine.

Simulated time advances window by window: orders placed inside a window
join the pending pool, stale pending orders are rejected, the configured
allocator runs at the boundary, accepted pairs get re-planned routes, and
every vehicle is advanced along its timeline to the next boundary while
drive / wait / available time accrues.

Allocation is instantaneous in simulated time; its wall-clock cost is
logged per window and flagged when it exceeds the window length.
"""

from __future__ import annotations

import json
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import allocator as alloc_mod
from . import dispatch
from .allocator import AllocatorConfig
from .roadnet import RoadNetwork

DRIVE = "drive"
WAIT = "wait"


class SimulationInputError(ValueError):
    pass


@dataclass
class SimConfig:
    delta: float = 180.0
    sla: float = 2700.0
    reject_after: float = 2700.0
    allocator: str = "fairfoody"  # fairfoody | greedy_edt | weighted
    lam: float = 1.0  # weighted-allocator blend
    allocator_cfg: AllocatorConfig = field(default_factory=AllocatorConfig)
    seed: int = 0

    def __post_init__(self):
        if self.delta <= 0 or self.sla <= 0 or self.reject_after <= 0:
            raise ValueError("delta, sla and reject_after must be > 0")
        if self.allocator not in ("fairfoody", "greedy_edt", "weighted"):
            raise ValueError(f"unknown allocator {self.allocator!r}")

    def allocate(self, state, pending, t):
        if self.allocator == "fairfoody":
            return alloc_mod.allocate_fairfoody(state, pending, self.allocator_cfg, t)
        if self.allocator == "greedy_edt":
            return alloc_mod.allocate_greedy_edt(state, pending, self.allocator_cfg, t)
        return alloc_mod.allocate_weighted(
            state, pending, self.allocator_cfg, t, self.lam
        )


def _num(x):
    """Integral floats serialize as ints so logs stay diffable."""
    if isinstance(x, float) and x.is_integer() and abs(x) < 2**53:
        return int(x)
    return x


# Per-window wall-clock fields vary run to run; they are zeroed when
# comparing logs for replay identity.
VOLATILE_FIELDS = ("wall_clock_s",)


class EventLog:
    """Append-only list of event records, one JSON object per line on disk."""

    def __init__(self, records=None):
        self.records = list(records or [])

    def add(self, type, **fields):
        rec = {"type": type}
        for k, v in fields.items():
            rec[k] = _num(v) if isinstance(v, float) else v
        self.records.append(rec)
        return rec

    def of_type(self, type):
        return [r for r in self.records if r["type"] == type]

    def to_ndjson(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def from_ndjson(cls, path):
        records = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    records.append(json.loads(line))
        return cls(records)

    def canonical_bytes(self, include_volatile=False):
        """Serialized form for replay comparison; wall-clock timing fields
        are zeroed unless include_volatile is set."""
        out = []
        for rec in self.records:
            if not include_volatile and any(f in rec for f in VOLATILE_FIELDS):
                rec = {
                    k: (0 if k in VOLATILE_FIELDS else v) for k, v in rec.items()
                }
            out.append(json.dumps(rec))
        return ("\n".join(out) + "\n").encode()


@dataclass
class _Segment:
    t0: float
    t1: float
    kind: str  # DRIVE or WAIT
    node_from: int
    node_to: int


@dataclass
class _Event:
    t: float
    kind: str  # picked_up | delivered
    order_id: int
    node: int


class _VehicleRun:
    """Mutable execution state the engine keeps per vehicle."""

    def __init__(self, vehicle):
        self.vehicle = vehicle
        self.segments = []  # future accounting segments, time-ordered
        self.events = []  # future pickup/delivery events, time-ordered
        self.watermark = None  # accounting done up to here
        self.ext = 0.0  # availability extension while a plan runs past duty

    def busy(self):
        return bool(self.segments or self.events)

    def availability(self):
        """Duty intervals, the last one started before the active plan's end
        stretched to cover it."""
        ivs = []
        for on, off in self.vehicle.duty_intervals:
            eff = off
            if on < self.ext and self.ext > off:
                eff = self.ext
            ivs.append((on, eff))
        return ivs


@dataclass
class SimState:
    """Read-only view handed to allocators."""

    net: RoadNetwork
    vehicles: list


def _plan_segments_events(plan):
    segments, events = [], []
    node, clock = plan.start_node, plan.start_time
    for stop, st in zip(plan.stops, plan.timeline):
        if st.drive_from_prev > 0:
            segments.append(_Segment(clock, st.arrive, DRIVE, node, stop.node))
        if st.wait > 0:
            segments.append(_Segment(st.arrive, st.depart, WAIT, stop.node, stop.node))
        if stop.kind == dispatch.PICKUP:
            events.append(_Event(st.depart, "picked_up", stop.order_id, stop.node))
        else:
            events.append(_Event(st.arrive, "delivered", stop.order_id, stop.node))
        node, clock = stop.node, st.depart
    return segments, events


def _overlap(a0, a1, b0, b1):
    return max(0.0, min(a1, b1) - max(a0, b0))


class Simulator:
    def __init__(self, net, orders, vehicles, cfg):
        self.net = net
        self.orders = list(orders)
        for a, b in zip(self.orders, self.orders[1:]):
            if b.placed_at < a.placed_at:
                raise SimulationInputError("order stream must be sorted by placed_at")
        self.vehicles = sorted(vehicles, key=lambda v: v.id)
        self.cfg = cfg
        self.log = EventLog()
        self.runs = {v.id: _VehicleRun(v) for v in self.vehicles}
        self.orders_by_id = {o.id: o for o in self.orders}
        self.delivered_count = {}

    # -- vehicle advancement -------------------------------------------------

    def advance_vehicle(self, vr, until):
        """Move a vehicle's accounting and events forward to `until`."""
        v = vr.vehicle
        if vr.watermark is None:
            vr.watermark = until if not vr.segments else min(until, vr.segments[0].t0)
        if until <= vr.watermark:
            return
        lo = vr.watermark

        remaining = []
        for seg in vr.segments:
            d = _overlap(seg.t0, seg.t1, lo, until)
            if d > 0:
                if seg.kind == DRIVE:
                    v.drive_time_total += d
                else:
                    v.wait_time_total += d
            if seg.t1 <= until:
                self.log.add(
                    seg.kind,
                    vehicle=v.id,
                    t0=float(seg.t0),
                    t1=float(seg.t1),
                    node_from=seg.node_from,
                    node_to=seg.node_to,
                )
                if seg.kind == DRIVE:
                    v.location = seg.node_to
            else:
                remaining.append(seg)
        vr.segments = remaining

        for on, off in vr.availability():
            v.available_time_total += _overlap(on, off, lo, until)

        fired = [e for e in vr.events if e.t <= until]
        vr.events = [e for e in vr.events if e.t > until]
        for e in sorted(fired, key=lambda e: e.t):
            order = self.orders_by_id[e.order_id]
            if e.kind == "picked_up":
                order.transition(dispatch.PICKED_UP)
                v.picked_up.add(order.id)
            else:
                order.transition(dispatch.DELIVERED)
                order.delivered_at = e.t
                v.assigned_orders.pop(order.id, None)
                v.picked_up.discard(order.id)
                self.delivered_count[v.id] = self.delivered_count.get(v.id, 0) + 1
            self.log.add(
                e.kind, t=float(e.t), order=order.id, vehicle=v.id, node=e.node
            )

        vr.watermark = until

    # -- assignment ----------------------------------------------------------

    def _apply_assignment(self, asg, t):
        v = asg.vehicle
        vr = self.runs[v.id]

        # A vehicle mid-leg finishes the leg first; a pending wait is cut
        # short at t (the pickup is re-planned).
        committed = []
        start_node, start_time = v.location, t
        for seg in vr.segments:
            if seg.t0 < t < seg.t1 and seg.kind == DRIVE:
                committed.append(seg)
                start_node, start_time = seg.node_to, seg.t1
            elif seg.t0 < t < seg.t1 and seg.kind == WAIT:
                self.log.add(
                    WAIT,
                    vehicle=v.id,
                    t0=float(seg.t0),
                    t1=float(t),
                    node_from=seg.node_from,
                    node_to=seg.node_to,
                )
        vr.segments = committed
        vr.events = []

        for o in asg.cluster.orders:
            o.transition(dispatch.ASSIGNED)
            o.assigned_vehicle = v.id
            v.assigned_orders[o.id] = o
            self.log.add(
                "assigned",
                t=float(t),
                order=o.id,
                vehicle=v.id,
                vehicle_location=v.location,
                near_dist=float(asg.near_dist),
                assigned_dist=float(asg.dist),
                cluster=asg.cluster.order_ids,
            )

        plan = dispatch.best_route_plan(
            start_node, v.carried(), [], start_time, self.net, max_o=v.capacity
        )
        v.plan = plan
        segs, evs = _plan_segments_events(plan)
        vr.segments = committed + segs
        vr.events = evs
        vr.ext = max(vr.ext, plan.completion_time)

    # -- main loop -----------------------------------------------------------

    def run(self):
        cfg = self.cfg
        self.log.add(
            "meta",
            delta=float(cfg.delta),
            sla=float(cfg.sla),
            reject_after=float(cfg.reject_after),
            allocator=cfg.allocator,
            lam=float(cfg.lam),
            gamma=float(cfg.allocator_cfg.gamma),
            f=float(cfg.allocator_cfg.f),
            eta=float(cfg.allocator_cfg.eta),
            max_o=cfg.allocator_cfg.max_o,
            omega=float(cfg.allocator_cfg.omega),
            w1=float(cfg.allocator_cfg.pay.w1),
            w2=float(cfg.allocator_cfg.pay.w2),
            seed=cfg.seed,
        )
        for v in self.vehicles:
            for on, off in v.duty_intervals:
                self.log.add("duty_on", t=float(on), vehicle=v.id, node=v.location)
                self.log.add("duty_off", t=float(off), vehicle=v.id)

        starts = [on for v in self.vehicles for on, _ in v.duty_intervals]
        if self.orders:
            starts.append(self.orders[0].placed_at)
        t0 = math.floor(min(starts, default=0.0) / cfg.delta) * cfg.delta
        for v in self.vehicles:
            self.runs[v.id].watermark = t0

        state = SimState(self.net, self.vehicles)
        pending = []
        next_order = 0
        window = 0
        while True:
            window += 1
            tb = t0 + window * cfg.delta

            for v in self.vehicles:
                self.advance_vehicle(self.runs[v.id], tb)

            while next_order < len(self.orders) and self.orders[next_order].placed_at < tb:
                o = self.orders[next_order]
                self.log.add(
                    "order_placed",
                    t=float(o.placed_at),
                    order=o.id,
                    restaurant=o.restaurant,
                    customer=o.customer,
                    prep=float(o.prep_time),
                )
                pending.append(o)
                next_order += 1

            still_pending = []
            for o in pending:
                if tb - o.placed_at > cfg.reject_after:
                    o.transition(dispatch.REJECTED)
                    self.log.add("rejected", t=float(tb), order=o.id)
                else:
                    still_pending.append(o)
            pending = still_pending

            n_pending = len(pending)
            assignments, wall, failed = [], 0.0, None
            if pending:
                started = _time.perf_counter()
                try:
                    assignments = cfg.allocate(state, pending, tb)
                except Exception as exc:  # carry the window's orders over
                    failed = f"{type(exc).__name__}: {exc}"
                wall = _time.perf_counter() - started
                for asg in assignments:
                    self._apply_assignment(asg, tb)
                assigned_ids = {
                    oid for asg in assignments for oid in asg.cluster.order_ids
                }
                pending = [o for o in pending if o.id not in assigned_ids]

            rec = self.log.add(
                "window",
                t=float(tb),
                pending=n_pending,
                allocated=sum(len(a.cluster.orders) for a in assignments),
                wall_clock_s=round(wall, 6),
                overflow=wall > cfg.delta,
            )
            if failed:
                rec["error"] = failed

            done = (
                next_order >= len(self.orders)
                and not pending
                and not any(self.runs[v.id].busy() for v in self.vehicles)
            )
            if done:
                break

        for v in self.vehicles:
            vr = self.runs[v.id]
            end = max((off for _, off in vr.availability()), default=vr.watermark)
            self.advance_vehicle(vr, max(end, vr.watermark))
            self.log.add(
                "vehicle_summary",
                vehicle=v.id,
                drive_s=float(v.drive_time_total),
                wait_s=float(v.wait_time_total),
                available_s=float(v.available_time_total),
                delivered=self.delivered_count.get(v.id, 0),
            )
        return self.log


def run(net, orders, vehicles, cfg):
    """Simulate a full order stream; returns the EventLog.

    Orders and vehicles are mutated in place (statuses, accumulators) so the
    caller can inspect final state. To simulate the same workload again,
    regenerate or reload it rather than reusing the mutated objects.
    """
    return Simulator(net, orders, vehicles, cfg).run()


def perturb_travel_times(net, fraction, inflation, seed=0):
    """Copy of the network with a random fraction of edges slowed down.

    ceil(fraction * |E|) edges, chosen uniformly under `seed`, get all 24
    slot weights multiplied by (1 + inflation).
    """
    if not (0 <= fraction <= 1):
        raise ValueError("fraction must be in [0, 1]")
    if inflation < 0:
        raise ValueError("inflation must be >= 0")
    weights = net.weights.copy()
    n = math.ceil(fraction * net.n_edges)
    if n:
        rng = np.random.default_rng(seed)
        idx = rng.choice(net.n_edges, size=n, replace=False)
        weights[idx] *= 1.0 + inflation
    return net.with_weights(weights)
