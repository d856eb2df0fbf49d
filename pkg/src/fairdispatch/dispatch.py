"""Domain model and per-pair dispatch quantities.

Orders, vehicles and route plans, plus everything the allocators need:
first/last mile, expected and shortest delivery times, augmented delivery
time and payment, and the time-normalized income rates.

All quantity functions are pure; vehicles are mutated only by the
simulator loop.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

PENDING = "pending"
ASSIGNED = "assigned"
PICKED_UP = "picked_up"
DELIVERED = "delivered"
REJECTED = "rejected"

_TRANSITIONS = {
    PENDING: {ASSIGNED, REJECTED},
    ASSIGNED: {PICKED_UP},
    PICKED_UP: {DELIVERED},
    DELIVERED: set(),
    REJECTED: set(),
}

PICKUP = "pickup"
DROPOFF = "dropoff"


class CapacityError(ValueError):
    """More orders than the vehicle's remaining capacity."""


class InfeasiblePlanError(ValueError):
    """No precedence-valid plan with all legs reachable."""


class OrderNotInPlanError(KeyError):
    pass


class UndefinedIncomeError(ValueError):
    """Income is undefined while available time is zero."""


@dataclass
class Order:
    id: int
    restaurant: int
    customer: int
    placed_at: float
    prep_time: float
    status: str = PENDING
    assigned_vehicle: object = None
    delivered_at: float | None = None

    def __post_init__(self):
        if self.restaurant == self.customer:
            raise ValueError(f"order {self.id}: restaurant == customer")
        if self.prep_time < 0:
            raise ValueError(f"order {self.id}: negative prep time")

    @property
    def ready_at(self):
        return self.placed_at + self.prep_time

    def transition(self, new_status):
        if new_status not in _TRANSITIONS[self.status]:
            raise ValueError(
                f"order {self.id}: illegal transition {self.status} -> {new_status}"
            )
        self.status = new_status


@dataclass
class PaymentParams:
    w1: float = 1.0  # pay per drive-second
    w2: float = 0.8  # pay per wait-second

    def __post_init__(self):
        if not (self.w1 >= self.w2 >= 0):
            raise ValueError("payment params must satisfy w1 >= w2 >= 0")


@dataclass(frozen=True)
class Stop:
    node: int
    kind: str  # PICKUP or DROPOFF
    order_id: int


@dataclass(frozen=True)
class StopTime:
    arrive: float
    wait: float
    depart: float
    drive_from_prev: float


@dataclass
class RoutePlan:
    start_node: int
    start_time: float
    stops: list  # of Stop
    timeline: list  # of StopTime, same length

    @property
    def completion_time(self):
        return self.timeline[-1].arrive if self.timeline else self.start_time

    @property
    def total_drive(self):
        return sum(st.drive_from_prev for st in self.timeline)

    @property
    def total_wait(self):
        return sum(st.wait for st in self.timeline)

    def stop_index(self, order_id, kind):
        for i, s in enumerate(self.stops):
            if s.order_id == order_id and s.kind == kind:
                return i
        raise OrderNotInPlanError(order_id)


@dataclass
class Vehicle:
    id: int
    location: int
    duty_intervals: list  # of (on, off)
    capacity: int = 3
    plan: RoutePlan | None = None
    assigned_orders: dict = field(default_factory=dict)  # order_id -> Order
    picked_up: set = field(default_factory=set)  # order ids already on board
    drive_time_total: float = 0.0
    wait_time_total: float = 0.0
    available_time_total: float = 0.0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"vehicle {self.id}: capacity must be >= 1")
        ivs = sorted(self.duty_intervals)
        for (a1, b1), (a2, b2) in zip(ivs, ivs[1:]):
            if b1 > a2:
                raise ValueError(f"vehicle {self.id}: overlapping duty intervals")
        self.duty_intervals = ivs

    def on_duty(self, t):
        return any(on <= t < off for on, off in self.duty_intervals)

    @property
    def remaining_capacity(self):
        return self.capacity - len(self.assigned_orders)

    def carried(self):
        """(order, picked) pairs for the vehicle's undelivered orders."""
        return [
            (o, oid in self.picked_up)
            for oid, o in sorted(self.assigned_orders.items())
        ]


def _evaluate_timeline(start_node, t, stops, net, ready_at):
    """Timeline for a fixed stop sequence; None if any leg is unreachable.

    Legs use shortest-path times with the slot frozen at t. Waiting accrues
    only at pickups reached before the order is ready.
    """
    timeline = []
    node, clock = start_node, t
    for s in stops:
        drive = net.shortest_path_time(node, s.node, t)
        if math.isinf(drive):
            return None
        arrive = clock + drive
        wait = 0.0
        if s.kind == PICKUP:
            wait = max(0.0, ready_at[s.order_id] - arrive)
        timeline.append(StopTime(arrive, wait, arrive + wait, drive))
        node, clock = s.node, arrive + wait
    return timeline


def _precedence_sequences(pickup_stops, dropoff_stops):
    """All stop orderings with each pickup before its dropoff."""
    items = pickup_stops + dropoff_stops
    need_pickup = {s.order_id for s in pickup_stops}
    for perm in itertools.permutations(items):
        seen = set()
        ok = True
        for s in perm:
            if s.kind == PICKUP:
                seen.add(s.order_id)
            elif s.order_id in need_pickup and s.order_id not in seen:
                ok = False
                break
        if ok:
            yield perm


def best_route_plan(vehicle_location, carried, added, t, net, max_o=3):
    """Quickest precedence-valid route plan over carried + added orders.

    carried: (Order, picked) pairs already on the vehicle; picked orders
    contribute only their dropoff stop. added: new orders (pickup+dropoff).
    Exhaustively enumerates stop orderings, evaluates each timeline, and
    returns the plan with the earliest completion; ties break on the
    lexicographically smallest (order id, kind) stop sequence.
    """
    carried = list(carried)
    added = list(added)
    if len(carried) + len(added) > max_o:
        raise CapacityError(
            f"{len(carried) + len(added)} orders exceed capacity {max_o}"
        )
    pickups, dropoffs, ready_at = [], [], {}
    for o, picked in carried:
        ready_at[o.id] = o.ready_at
        if not picked:
            pickups.append(Stop(o.restaurant, PICKUP, o.id))
        dropoffs.append(Stop(o.customer, DROPOFF, o.id))
    for o in added:
        ready_at[o.id] = o.ready_at
        pickups.append(Stop(o.restaurant, PICKUP, o.id))
        dropoffs.append(Stop(o.customer, DROPOFF, o.id))

    if not pickups and not dropoffs:
        return RoutePlan(vehicle_location, t, [], [])

    best = None
    for seq in _precedence_sequences(pickups, dropoffs):
        timeline = _evaluate_timeline(vehicle_location, t, seq, net, ready_at)
        if timeline is None:
            continue
        key = (timeline[-1].arrive, tuple((s.order_id, s.kind) for s in seq))
        if best is None or key < best[0]:
            best = (key, seq, timeline)
    if best is None:
        raise InfeasiblePlanError("no reachable stop ordering")
    _, seq, timeline = best
    return RoutePlan(vehicle_location, t, list(seq), timeline)


def first_mile(order, plan):
    """Drive time from plan start to the order's pickup stop."""
    i = plan.stop_index(order.id, PICKUP)
    return sum(st.drive_from_prev for st in plan.timeline[: i + 1])


def last_mile(order, plan):
    """Drive time from the order's pickup stop to its dropoff, along the plan."""
    i = plan.stop_index(order.id, PICKUP)
    j = plan.stop_index(order.id, DROPOFF)
    return sum(st.drive_from_prev for st in plan.timeline[i + 1 : j + 1])


def edt(order, plan, assign_latency=0.0):
    """Expected delivery time: max(latency + first mile, prep) + last mile."""
    return max(assign_latency + first_mile(order, plan), order.prep_time) + last_mile(
        order, plan
    )


def sdt(order, net):
    """Shortest delivery time: prep plus the direct restaurant->customer path."""
    return order.prep_time + net.shortest_path_time(
        order.restaurant, order.customer, order.placed_at
    )


def augmented_plan(vehicle, cluster, t, net):
    """Best plan over the vehicle's undelivered orders plus a new cluster."""
    cluster = list(cluster)
    if len(cluster) > vehicle.remaining_capacity:
        raise CapacityError(
            f"vehicle {vehicle.id}: cluster of {len(cluster)} exceeds remaining "
            f"capacity {vehicle.remaining_capacity}"
        )
    return best_route_plan(
        vehicle.location, vehicle.carried(), cluster, t, net, max_o=vehicle.capacity
    )


def aodt(cluster, vehicle, t, net):
    """Extra completion time if `cluster` is appended to the vehicle's plan now."""
    plan = augmented_plan(vehicle, cluster, t, net)
    return plan.completion_time - t


def aop(cluster, vehicle, t, net, pay):
    """Extra payment over the augmented plan's horizon: w1*drive + w2*wait."""
    plan = augmented_plan(vehicle, cluster, t, net)
    return pay.w1 * plan.total_drive + pay.w2 * plan.total_wait


def income(vehicle, pay):
    """Time-normalized income: (w1*dT + w2*wT) / aT."""
    if vehicle.available_time_total <= 0:
        raise UndefinedIncomeError(f"vehicle {vehicle.id} has no available time")
    return (
        pay.w1 * vehicle.drive_time_total + pay.w2 * vehicle.wait_time_total
    ) / vehicle.available_time_total


def income_or_zero(vehicle, pay):
    """Income with fresh (aT = 0) vehicles pinned to 0, i.e. minimum income."""
    if vehicle.available_time_total <= 0:
        return 0.0
    return income(vehicle, pay)


def ns_income(vehicle, cluster, t, net, pay):
    """Income rate the vehicle would have after completing `cluster`.

    (inc * aT + AOP) / (aT + AODT), with aT the accumulated available time.
    """
    at = vehicle.available_time_total
    inc = income_or_zero(vehicle, pay)
    plan = augmented_plan(vehicle, cluster, t, net)
    extra_time = plan.completion_time - t
    extra_pay = pay.w1 * plan.total_drive + pay.w2 * plan.total_wait
    denom = at + extra_time
    if denom <= 0:
        return 0.0
    return (inc * at + extra_pay) / denom
