"""Discrete-event simulator: request lifecycle, courier status machine, dispatch.

A dispatched courier walks to its target grid and then owns a patrol window
of the action's patrol minutes. Within the window it executes pickup route
segments planned from the grid's live requests, replanning whenever it runs
dry and a new request lands in the grid; leftover window time is spent
waiting on station. The action completes when the window closes (immediately
on arrival for patrol-0 relocations), which is when the courier reports free
and the action's collected price becomes its reward.

Event kinds at equal timestamps resolve as: request arrivals first (new
demand is visible the instant it appears), then courier grid-arrivals (a
courier reaching a grid exactly at a deadline may still plan that request),
then expiries, then route-segment completions, then patrol-window closes,
then courier-free dispatches (ascending courier id, each seeing the effects
of earlier dispatches in the same instant).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .domain import (
    ActionSpec,
    Courier,
    CourierStatus,
    GridWorld,
    Point,
    Request,
    RequestStatus,
    action_decode,
    action_index,
    travel_time,
)
from .routing import Route, plan_route, validate_route
from .scenario import ProblemInstance

_ARRIVAL, _COURIER_ARRIVE, _EXPIRE, _SEGMENT_DONE, _PATROL_END, _FREE = range(6)

# An action that consumes no walk and no patrol time would re-dispatch in the
# same instant forever; such no-ops idle briefly so the clock advances.
NOOP_IDLE_MINUTES = 1.0

_EPS = 1e-9


class DispatchError(RuntimeError):
    """A policy returned something that is not a valid action."""


class EngineInvariantError(RuntimeError):
    """The simulator produced a state that violates its own contracts."""


@dataclass
class CourierView:
    """Read-only courier facts exposed to policies through the snapshot."""

    id: int
    position: Point
    grid: int
    status: CourierStatus
    busy_until: float
    free_position: Point
    fleet: str
    speed_km_per_min: float


class Snapshot:
    """Consistent view of the world at one event time.

    Aggregate arrays are indexed by grid; pending lists exclude Locked,
    Served, and Expired requests. Policies must treat everything here as
    read-only.
    """

    def __init__(
        self,
        now: float,
        world: GridWorld,
        horizon: float,
        pending: list[Request],
        couriers: list[CourierView],
    ):
        self.now = now
        self.world = world
        self.horizon = horizon
        self.pending = pending
        self.couriers = couriers
        self.pending_count = np.zeros(world.n_grids)
        self.pending_price = np.zeros(world.n_grids)
        self._by_grid: dict[int, list[Request]] = {}
        for r in pending:
            self.pending_count[r.grid] += 1
            self.pending_price[r.grid] += r.price
            self._by_grid.setdefault(r.grid, []).append(r)
        self.courier_count = np.zeros(world.n_grids)
        for c in couriers:
            self.courier_count[c.grid] += 1

    def pending_in_grid(self, grid: int) -> list[Request]:
        return self._by_grid.get(grid, [])

    @property
    def fleet_size(self) -> int:
        return len(self.couriers)


@dataclass
class DecisionRecord:
    """One dispatch decision and, once executed, its outcome."""

    courier_id: int
    index: int  # position within this courier's own trajectory
    decision_time: float
    from_grid: int
    action: ActionSpec
    action_index: int
    target_grid: int
    reward: float = 0.0
    completion_time: Optional[float] = None
    routes: tuple[Route, ...] = ()


@dataclass
class EpisodeResult:
    served_price: float
    total_price: float
    score: float
    decisions: dict[int, list[DecisionRecord]]
    courier_revenue: dict[int, float]
    courier_fleet: dict[int, str]
    request_status: dict[int, RequestStatus]
    horizon: float

    def all_decisions(self) -> list[DecisionRecord]:
        out = []
        for cid in sorted(self.decisions):
            out.extend(self.decisions[cid])
        return out

    def fleet_revenue(self) -> dict[str, float]:
        totals: dict[str, float] = {}
        for cid, revenue in self.courier_revenue.items():
            tag = self.courier_fleet[cid]
            totals[tag] = totals.get(tag, 0.0) + revenue
        return totals


Dispatcher = Callable[[Snapshot, CourierView, np.random.Generator], "ActionSpec | int"]


@dataclass
class _CourierState:
    courier: Courier
    anchor: Point  # position at anchor_time
    anchor_time: float = 0.0
    leg_target: Optional[Point] = None
    leg_arrival: float = 0.0
    patrol_grid: Optional[int] = None
    patrol_end: float = 0.0
    segment: Optional[Route] = None
    open_decision: Optional[DecisionRecord] = None
    segments: list[Route] = field(default_factory=list)
    n_decisions: int = 0

    def position_at(self, now: float) -> Point:
        if (
            self.courier.status is CourierStatus.WALKING
            and self.leg_target is not None
            and self.leg_arrival > self.anchor_time
        ):
            f = min(max((now - self.anchor_time) / (self.leg_arrival - self.anchor_time), 0.0), 1.0)
            return Point(
                self.anchor.x + f * (self.leg_target.x - self.anchor.x),
                self.anchor.y + f * (self.leg_target.y - self.anchor.y),
            )
        return self.anchor

    def predicted_free_position(self) -> Point:
        if self.courier.status is CourierStatus.WALKING and self.leg_target is not None:
            return self.leg_target
        if self.courier.status is CourierStatus.PICKING and self.segment is not None:
            return self.segment.end_point
        return self.anchor


def default_couriers(instance: ProblemInstance) -> list[Courier]:
    """Build the fleet described by an instance's metadata."""
    meta = instance.meta
    count = int(meta.get("courier_count", 10))
    gx, gy = meta.get("courier_start_grid", (10, 10))
    speed = float(meta.get("speed_km_per_min", 0.5))
    start = instance.world.grid_center(instance.world.grid_index(int(gx), int(gy)))
    return [
        Courier(id=i, position=start, speed_km_per_min=speed)
        for i in range(count)
    ]


class Simulation:
    """Single-owner episode state; drive with run() or step-by-step events."""

    def __init__(
        self,
        instance: ProblemInstance,
        dispatcher: Dispatcher,
        seed: int = 0,
        couriers: Optional[list[Courier]] = None,
        validate: bool = True,
    ):
        self.instance = instance
        self.world = instance.world
        self.horizon = instance.horizon
        self.dispatcher = dispatcher
        self.rng = np.random.default_rng(seed)
        self.validate = validate
        self.now = 0.0

        # Private request copies: episodes must not mutate the instance.
        self.requests = {r.id: replace(r) for r in instance.requests}
        self._pending_ids: set[int] = set()

        fleet = couriers if couriers is not None else default_couriers(instance)
        self.couriers = {
            c.id: _CourierState(courier=replace(c), anchor=c.position) for c in fleet
        }

        self._queue: list[tuple[float, int, int, int]] = []
        self._payload: dict[int, tuple] = {}
        self._seq = 0
        self.decisions: dict[int, list[DecisionRecord]] = {c: [] for c in self.couriers}

        for r in self.requests.values():
            self._push(r.arrival_time, _ARRIVAL, r.id, ("arrival", r.id))
            self._push(r.latest, _EXPIRE, r.id, ("expire", r.id))
        for cid in sorted(self.couriers):
            self._push(0.0, _FREE, cid, ("free", cid))

    # -- event queue -------------------------------------------------------

    def _push(self, time: float, kind: int, tiebreak: int, payload: tuple) -> None:
        self._seq += 1
        self._payload[self._seq] = payload
        heapq.heappush(self._queue, (time, kind, tiebreak, self._seq))

    # -- snapshots ---------------------------------------------------------

    def snapshot(self) -> Snapshot:
        pending = [self.requests[i] for i in sorted(self._pending_ids)]
        views = []
        for cid in sorted(self.couriers):
            st = self.couriers[cid]
            pos = st.position_at(self.now)
            views.append(
                CourierView(
                    id=cid,
                    position=pos,
                    grid=self.world.grid_of_point(pos),
                    status=st.courier.status,
                    busy_until=max(st.courier.busy_until, self.now),
                    free_position=st.predicted_free_position(),
                    fleet=st.courier.fleet,
                    speed_km_per_min=st.courier.speed_km_per_min,
                )
            )
        return Snapshot(self.now, self.world, self.horizon, pending, views)

    # -- event handlers ----------------------------------------------------

    def _handle_arrival(self, rid: int) -> None:
        r = self.requests[rid]
        if r.status is RequestStatus.PENDING:
            self._pending_ids.add(rid)

    def _handle_expire(self, rid: int) -> None:
        r = self.requests[rid]
        if r.status is RequestStatus.PENDING:
            r.status = RequestStatus.EXPIRED
            self._pending_ids.discard(rid)

    def _handle_free(self, cid: int) -> None:
        if self.now >= self.horizon:
            return  # shift over: no new tasks
        st = self.couriers[cid]
        snap = self.snapshot()
        view = next(v for v in snap.couriers if v.id == cid)
        raw = self.dispatcher(snap, view, self.rng)
        action = self._coerce_action(raw, cid)

        from_grid = self.world.grid_of_point(st.anchor)
        target = action.target_grid(self.world, from_grid)
        center = self.world.grid_center(target)
        walk = travel_time(st.anchor, center, self.world, st.courier.speed_km_per_min)

        record = DecisionRecord(
            courier_id=cid,
            index=st.n_decisions,
            decision_time=self.now,
            from_grid=from_grid,
            action=action,
            action_index=action_index(action),
            target_grid=target,
        )
        st.n_decisions += 1
        st.open_decision = record
        st.segments = []
        self.decisions[cid].append(record)

        st.courier.status = CourierStatus.WALKING
        st.courier.busy_until = self.now + walk + action.patrol_minutes
        st.anchor_time = self.now
        st.leg_target = center
        st.leg_arrival = self.now + walk
        st.patrol_grid = target
        self._push(self.now + walk, _COURIER_ARRIVE, cid, ("arrive", cid))

    def _coerce_action(self, raw, cid: int) -> ActionSpec:
        if isinstance(raw, ActionSpec):
            return raw
        try:
            return action_decode(int(raw))
        except (TypeError, ValueError) as e:
            raise DispatchError(
                f"courier {cid} at t={self.now:.3f}: invalid action {raw!r} ({e})"
            ) from None

    def _handle_courier_arrive(self, cid: int) -> None:
        st = self.couriers[cid]
        action = st.open_decision.action
        walk_was_noop = self.now <= st.open_decision.decision_time + _EPS
        st.anchor = self.world.grid_center(st.patrol_grid)
        st.anchor_time = self.now
        st.leg_target = None
        st.courier.status = CourierStatus.PICKING

        # Patrol minutes cap the time on station, they are not a dwell
        # obligation: the courier works pickup segments until the grid runs
        # dry or the window closes, then reports free.
        st.patrol_end = self.now + action.patrol_minutes
        if not self._continue_patrol(cid):
            self._finish_patrol(cid, idle=walk_was_noop)

    def _continue_patrol(self, cid: int) -> bool:
        """Plan the next pickup segment inside the remaining patrol window.

        Requests that landed in the grid while the courier was busy picking
        are fair game for the next segment. Returns True when a segment was
        started.
        """
        st = self.couriers[cid]
        budget = st.patrol_end - self.now
        if budget <= _EPS:
            return False
        candidates = [
            self.requests[i]
            for i in sorted(self._pending_ids)
            if self.requests[i].grid == st.patrol_grid and self.requests[i].latest >= self.now
        ]
        route = plan_route(
            st.anchor, self.now, budget, candidates, self.world, st.courier.speed_km_per_min
        )
        if route.is_empty():
            return False
        if self.validate:
            problems = validate_route(route, self.requests, self.world, st.courier.speed_km_per_min)
            if problems:
                raise EngineInvariantError(
                    f"courier {cid} segment at t={self.now:.3f}: " + "; ".join(problems)
                )
        for rid, _ in route.stops:
            r = self.requests[rid]
            if r.status is not RequestStatus.PENDING:
                raise EngineInvariantError(f"request {rid} double-locked at t={self.now:.3f}")
            r.status = RequestStatus.LOCKED
            self._pending_ids.discard(rid)
        st.segment = route
        self._push(route.end_time, _SEGMENT_DONE, cid, ("segment", cid))
        return True

    def _handle_segment_done(self, cid: int) -> None:
        st = self.couriers[cid]
        route = st.segment
        if route is None:
            raise EngineInvariantError(f"courier {cid} finished a segment it never started")
        for rid, _ in route.stops:
            self.requests[rid].status = RequestStatus.SERVED
        st.anchor = route.end_point
        st.anchor_time = self.now
        st.courier.position = st.anchor
        st.courier.revenue += route.total_price
        st.segments.append(route)
        st.segment = None
        if not self._continue_patrol(cid):
            self._finish_patrol(cid)

    def _finish_patrol(self, cid: int, idle: bool = False) -> None:
        st = self.couriers[cid]
        record = st.open_decision
        if record is None:
            raise EngineInvariantError(f"courier {cid} closed a patrol with no open decision")
        free_at = self.now + NOOP_IDLE_MINUTES if idle else self.now
        record.reward = float(sum(r.total_price for r in st.segments))
        record.completion_time = free_at
        record.routes = tuple(st.segments)
        st.open_decision = None
        st.segments = []
        st.patrol_grid = None
        st.patrol_end = free_at
        st.courier.busy_until = free_at
        self._push(free_at, _PATROL_END, cid, ("patrol_end", cid))

    def _handle_patrol_end(self, cid: int) -> None:
        st = self.couriers[cid]
        st.courier.status = CourierStatus.FREE
        st.courier.busy_until = self.now
        self._push(self.now, _FREE, cid, ("free", cid))

    # -- driver ------------------------------------------------------------

    def run(self) -> EpisodeResult:
        handlers = {
            "arrival": self._handle_arrival,
            "expire": self._handle_expire,
            "free": self._handle_free,
            "arrive": self._handle_courier_arrive,
            "segment": self._handle_segment_done,
            "patrol_end": self._handle_patrol_end,
        }
        while self._queue:
            time, _kind, _tie, seq = heapq.heappop(self._queue)
            if time < self.now - 1e-9:
                raise EngineInvariantError(f"event time {time} precedes now {self.now}")
            self.now = max(self.now, time)
            name, arg = self._payload.pop(seq)
            handlers[name](arg)

        served = sum(st.courier.revenue for st in self.couriers.values())
        total = self.instance.total_price()
        return EpisodeResult(
            served_price=served,
            total_price=total,
            score=(served / total) if total > 0 else 0.0,
            decisions=self.decisions,
            courier_revenue={cid: st.courier.revenue for cid, st in self.couriers.items()},
            courier_fleet={cid: st.courier.fleet for cid, st in self.couriers.items()},
            request_status={rid: r.status for rid, r in self.requests.items()},
            horizon=self.horizon,
        )


def run_episode(
    instance: ProblemInstance,
    dispatcher: Dispatcher,
    seed: int = 0,
    couriers: Optional[list[Courier]] = None,
    validate: bool = True,
) -> EpisodeResult:
    """Simulate one full day and return its score and decision logs."""
    return Simulation(instance, dispatcher, seed=seed, couriers=couriers, validate=validate).run()
