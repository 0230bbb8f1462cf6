"""Within-grid pickup routing: prize-collecting with hard start-time windows.

Given a courier arriving at a grid with a patrol-minutes budget, pick and
order a subset of the grid's live requests to maximize collected price. The
solver is a deterministic greedy insertion: repeatedly add the feasible
(request, position) insertion with the best price per added minute. Waiting
on site until a request's earliest start is allowed and counts against the
budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .domain import Courier, GridWorld, Point, Request, travel_time

_EPS = 1e-9


@dataclass(frozen=True)
class Route:
    """A planned pickup sequence with its verified timeline."""

    stops: tuple[tuple[int, float], ...]  # (request id, planned service start)
    start_point: Point
    start_time: float
    budget: float
    total_price: float
    end_time: float
    end_point: Point

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    def is_empty(self) -> bool:
        return not self.stops


def _timeline(
    start: Point,
    start_time: float,
    ordered: Sequence[Request],
    world: GridWorld,
    speed: float,
) -> Optional[tuple[list[float], float, Point]]:
    """Walk an ordered visit plan; None if any window cannot be met."""
    t = start_time
    pos = start
    starts = []
    for r in ordered:
        t += travel_time(pos, r.location, world, speed)
        begin = max(t, r.earliest)
        if begin > r.latest + _EPS:
            return None
        starts.append(begin)
        t = begin + r.service_time
        pos = r.location
    return starts, t, pos


def empty_route(start: Point, start_time: float, budget: float) -> Route:
    return Route(
        stops=(),
        start_point=start,
        start_time=start_time,
        budget=budget,
        total_price=0.0,
        end_time=start_time,
        end_point=start,
    )


def plan_route(
    start: Point,
    start_time: float,
    budget: float,
    candidates: Iterable[Request],
    world: GridWorld,
    speed: float,
) -> Route:
    """Greedy insertion over (request, position) pairs.

    Each step inserts the feasible candidate maximizing price / added duration
    (insertions absorbing into waiting count as zero added time and win);
    ties fall to the earlier deadline, then the smaller id, then the earlier
    position. Inserted stops are never removed. A zero budget, or no feasible
    insertion, yields the empty route.
    """
    pool = sorted(candidates, key=lambda r: r.id)
    route: list[Request] = []
    duration = 0.0
    if budget <= 0 or not pool:
        return empty_route(start, start_time, budget)
    if len(pool) == 1:  # hot path: one candidate means one insertion attempt
        r = pool[0]
        walk = _timeline(start, start_time, pool, world, speed)
        if walk is None or walk[1] - start_time > budget + _EPS:
            return empty_route(start, start_time, budget)
        starts, end_time, end_point = walk
        return Route(
            stops=((r.id, starts[0]),),
            start_point=start,
            start_time=start_time,
            budget=budget,
            total_price=r.price,
            end_time=end_time,
            end_point=end_point,
        )

    while pool:
        best = None  # (neg_ratio, latest, id, position, order, walk)
        for r in pool:
            for p in range(len(route) + 1):
                order = route[:p] + [r] + route[p:]
                walk = _timeline(start, start_time, order, world, speed)
                if walk is None:
                    continue
                new_duration = walk[1] - start_time
                if new_duration > budget + _EPS:
                    continue
                added = new_duration - duration
                ratio = r.price / added if added > _EPS else float("inf")
                key = (-ratio, r.latest, r.id, p)
                if best is None or key < best[0]:
                    best = (key, r, order, new_duration)
        if best is None:
            break
        _, chosen, route, duration = best
        pool.remove(chosen)

    if not route:
        return empty_route(start, start_time, budget)
    walk = _timeline(start, start_time, route, world, speed)
    starts, end_time, end_point = walk
    return Route(
        stops=tuple((r.id, s) for r, s in zip(route, starts)),
        start_point=start,
        start_time=start_time,
        budget=budget,
        total_price=float(sum(r.price for r in route)),
        end_time=end_time,
        end_point=end_point,
    )


def validate_route(
    route: Route,
    requests_by_id: dict[int, Request],
    world: GridWorld,
    speed: float,
) -> list[str]:
    """Independently re-walk a route's timeline and report invariant breaches.

    Checks: window bounds on every planned start, the no-gap chaining
    inequality, the budget, the price total, and the end time/point. Returns
    a list of violation descriptions (empty means valid).
    """
    problems = []
    t = route.start_time
    pos = route.start_point
    price = 0.0
    prev_end = route.start_time
    for k, (rid, planned) in enumerate(route.stops):
        r = requests_by_id[rid]
        arrive = t + travel_time(pos, r.location, world, speed)
        if planned < arrive - _EPS:
            problems.append(f"stop {k} (request {rid}): starts {planned} before arrival {arrive}")
        if planned < r.earliest - _EPS or planned > r.latest + _EPS:
            problems.append(
                f"stop {k} (request {rid}): start {planned} outside [{r.earliest}, {r.latest}]"
            )
        if planned < prev_end - _EPS:
            problems.append(f"stop {k} (request {rid}): overlaps previous stop")
        waited = planned - max(arrive, r.earliest)
        if abs(waited) > _EPS:
            problems.append(f"stop {k} (request {rid}): idle gap {waited} beyond window waiting")
        prev_end = planned + r.service_time
        t = prev_end
        pos = r.location
        price += r.price
    if route.stops:
        if abs(t - route.end_time) > _EPS:
            problems.append(f"end_time {route.end_time} != recomputed {t}")
        if pos != route.end_point:
            problems.append(f"end_point {route.end_point} != last stop {pos}")
    if route.end_time - route.start_time > route.budget + _EPS:
        problems.append(
            f"duration {route.end_time - route.start_time} exceeds budget {route.budget}"
        )
    if abs(price - route.total_price) > _EPS:
        problems.append(f"total_price {route.total_price} != recomputed {price}")
    return problems


def estimate_profit_from(
    origin: Point,
    free_time: float,
    target_grid: int,
    patrol_minutes: float,
    snapshot,
    speed: float,
) -> tuple[float, float]:
    """Expected gain of patrolling a grid, starting from an explicit origin.

    Pre-calls the route planner on the grid's live pending requests, filtered
    to those whose windows survive the walk there. Returns (predicted price,
    predicted total minutes); an empty route patrols its full budget.
    """
    world = snapshot.world
    center = world.grid_center(target_grid)
    travel = travel_time(origin, center, world, speed)
    arrival = free_time + travel
    candidates = [r for r in snapshot.pending_in_grid(target_grid) if r.latest >= arrival]
    route = plan_route(center, arrival, patrol_minutes, candidates, world, speed)
    if route.is_empty():
        return 0.0, travel + patrol_minutes
    return route.total_price, travel + (route.end_time - arrival)


def estimate_profit(
    courier: Courier,
    target_grid: int,
    patrol_minutes: float,
    snapshot,
    now: float,
) -> tuple[float, float]:
    """estimate_profit_from, anchored at the courier's current position."""
    return estimate_profit_from(
        courier.position, now, target_grid, patrol_minutes, snapshot, courier.speed_km_per_min
    )
