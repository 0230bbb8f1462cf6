"""Hand-designed dispatchers: Random, GHAV, GHEP, MBM, and the exact
max-weight bipartite matching MBM relies on.

All policies share the signature (snapshot, courier, rng) -> ActionSpec and
are stateless; rng is only used by the random dispatcher.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import (
    N_ACTIONS,
    ActionSpec,
    Point,
    action_decode,
    travel_time,
)
from .routing import estimate_profit_from

AVAILABILITY_WINDOW_MINUTES = 20.0


def random_policy(snapshot, courier, rng: np.random.Generator) -> ActionSpec:
    """Uniform draw over the 100 actions."""
    return action_decode(int(rng.integers(0, N_ACTIONS)))


def _scan_actions(snapshot, courier):
    """Yield (index, action, target_grid, travel_minutes), memoizing per grid."""
    world = snapshot.world
    from_grid = world.grid_of_point(courier.position)
    travel_cache: dict[int, float] = {}
    for i in range(N_ACTIONS):
        action = action_decode(i)
        target = action.target_grid(world, from_grid)
        if target not in travel_cache:
            travel_cache[target] = travel_time(
                courier.position, world.grid_center(target), world, courier.speed_km_per_min
            )
        yield i, action, target, travel_cache[target]


def ghav(snapshot, courier, rng=None, zero_patrol: str = "zero") -> ActionSpec:
    """Greedy on raw pending price per minute of (travel + patrol).

    A patrol-0 action collects nothing, so by default it scores 0; the
    literal travel-only denominator is available as zero_patrol="travel_only"
    (it makes relocation dominate and the dispatcher degenerate).
    """
    best_i, best_score = 0, -1.0
    for i, action, target, travel in _scan_actions(snapshot, courier):
        price = float(snapshot.pending_price[target])
        if action.patrol_minutes == 0:
            if zero_patrol == "travel_only" and travel > 0:
                score = price / travel
            else:
                score = 0.0
        else:
            score = price / (travel + action.patrol_minutes)
        if score > best_score + 1e-12:
            best_i, best_score = i, score
    return action_decode(best_i)


def ghep(snapshot, courier, rng=None) -> ActionSpec:
    """Greedy on solver-predicted collectible price per predicted minute."""
    best_i, best_score = 0, -1.0
    for i, action, target, _travel in _scan_actions(snapshot, courier):
        price, minutes = estimate_profit_from(
            courier.position,
            snapshot.now,
            target,
            action.patrol_minutes,
            snapshot,
            courier.speed_km_per_min,
        )
        score = price / minutes if minutes > 0 else 0.0
        if score > best_score + 1e-12:
            best_i, best_score = i, score
    return action_decode(best_i)


# ---------------------------------------------------------------------------
# Exact maximum-weight bipartite matching


class MatchingError(ValueError):
    pass


@dataclass
class MatchingResult:
    assignment: tuple[int, ...]  # column per row
    value: float


def _jv_assign(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jonker-Volgenant shortest-augmenting-path assignment (minimization).

    cost is n x m with n <= m; every row gets a column. Returns (row_to_col,
    row potentials u, column potentials v) satisfying u[i] + v[j] <=
    cost[i, j] with equality on assigned pairs.
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)  # row (1-based) matched to column j; 0 = free
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        way = np.zeros(m + 1, dtype=np.int64)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free_cols = np.nonzero(~used[1:])[0] + 1
            cur = cost[i0 - 1, free_cols - 1] - u[i0] - v[free_cols]
            better = cur < minv[free_cols]
            minv[free_cols[better]] = cur[better]
            way[free_cols[better]] = j0
            pos = int(np.argmin(minv[free_cols]))
            j1 = int(free_cols[pos])
            delta = minv[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = int(way[j0])
            p[j0] = p[j1]
            j0 = j1
    row_to_col = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j]:
            row_to_col[p[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _solve_value(w: np.ndarray) -> float:
    """Optimal assignment weight of a (possibly empty) submatrix."""
    if w.shape[0] == 0:
        return 0.0
    row_to_col, _, _ = _jv_assign(-w)
    return float(w[np.arange(w.shape[0]), row_to_col].sum())


def max_weight_matching(weights, canonical: bool = True) -> MatchingResult:
    """Exact maximum-weight one-to-one assignment of rows to columns.

    Requires finite non-negative weights and rows <= cols; every row is
    matched (never harmful with non-negative weights). With canonical=True
    the result is the lexicographically smallest optimal assignment (row 0's
    column minimized first, then row 1's, ...): each row greedily takes the
    smallest tight column whose choice provably preserves the optimal value,
    verified by re-solving the reduced problem. canonical=False keeps the
    solver's own deterministic tie choice.
    """
    w = np.asarray(weights, dtype=float)
    if w.size == 0:
        return MatchingResult(assignment=(), value=0.0)
    if w.ndim != 2:
        raise MatchingError(f"weight matrix must be 2-D, got shape {w.shape}")
    n, m = w.shape
    if n > m:
        raise MatchingError(f"more rows than columns ({n} > {m})")
    if not np.isfinite(w).all():
        raise MatchingError("weights must be finite")
    if (w < 0).any():
        raise MatchingError("weights must be non-negative")

    if not w.any():  # all-zero: every assignment is optimal
        return MatchingResult(assignment=tuple(range(n)), value=0.0)

    row_to_col, u, v = _jv_assign(-w)
    value = float(w[np.arange(n), row_to_col].sum())
    if not canonical:
        return MatchingResult(assignment=tuple(int(c) for c in row_to_col), value=value)

    # Optimal assignments only use tight edges (complementary slackness), so
    # those are the only candidates worth testing.
    eps = 1e-9 * max(1.0, float(np.abs(w).max()))
    tight = np.abs((-w) - u[:, None] - v[None, :]) <= eps

    chosen: list[int] = []
    used = np.zeros(m, dtype=bool)
    remaining = value
    for i in range(n):
        fixed = None
        for c in np.nonzero(tight[i] & ~used)[0]:
            rest = w[i + 1 :, :][:, ~used & (np.arange(m) != c)]
            if w[i, c] + _solve_value(rest) >= remaining - eps:
                fixed = int(c)
                break
        if fixed is None:  # numerically impossible, but fail loudly
            raise MatchingError("no optimal-preserving column found; weights degenerate")
        used[fixed] = True
        chosen.append(fixed)
        remaining -= w[i, fixed]
    return MatchingResult(assignment=tuple(chosen), value=value)


# ---------------------------------------------------------------------------
# MBM dispatcher


def _candidate_grids(snapshot, view) -> list[int]:
    """Grids in a courier's clipped 5x5 holding pending demand, in the same
    (dy, dx) scan order the action enumeration uses (first occurrence wins)."""
    world = snapshot.world
    from_grid = world.grid_of_point(view.free_position)
    gx, gy = world.grid_coords(from_grid)
    out, seen = [], set()
    for dy in range(-2, 3):
        for dx in range(-2, 3):
            cx, cy = world.clip_grid(gx + dx, gy + dy)
            g = world.grid_index(cx, cy)
            if g in seen or not snapshot.pending_count[g]:
                continue
            seen.add(g)
            out.append(g)
    return out


def _sharing_component(rows, candidates: dict[int, list[int]], me: int):
    """Couriers connected to `me` through shared candidate grids."""
    by_grid: dict[int, list[int]] = {}
    for v in rows:
        for g in candidates[v.id]:
            by_grid.setdefault(g, []).append(v.id)
    reached = {me}
    frontier = [me]
    row_of = {v.id: v for v in rows}
    while frontier:
        cid = frontier.pop()
        for g in candidates.get(cid, []):
            for other in by_grid.get(g, []):
                if other not in reached:
                    reached.add(other)
                    frontier.append(other)
    return [v for v in rows if v.id in reached] or [row_of[me]]


def _best_patrol_rate(snapshot, origin: Point, free_time: float, grid: int, speed: float):
    """Best (rate, patrol) over the patrol budgets; ties take the shorter."""
    best_rate, best_patrol = 0.0, 0
    for patrol in (10, 20, 30):  # patrol 0 collects nothing, rate 0
        price, minutes = estimate_profit_from(origin, free_time, grid, patrol, snapshot, speed)
        rate = price / minutes if minutes > 0 else 0.0
        if rate > best_rate + 1e-12:
            best_rate, best_patrol = rate, patrol
    return best_rate, best_patrol


def _action_for_target(world, from_grid: int, target: int, patrol: int) -> ActionSpec:
    """Smallest-index action mapping from_grid onto target with this patrol."""
    for dy in range(-2, 3):
        for dx in range(-2, 3):
            a = ActionSpec(dx=dx, dy=dy, patrol_minutes=patrol)
            if a.target_grid(world, from_grid) == target:
                return a
    raise MatchingError(f"grid {target} unreachable from grid {from_grid}")


def mbm(snapshot, courier, rng=None) -> ActionSpec:
    """Max-weight matching between soon-available couriers and target grids.

    Rows are couriers available within 20 minutes (busy ones enter with their
    predicted free position/time); a grid may be claimed by at most one
    courier per round, at its best patrol rate for that courier. Only the
    requesting courier's match is committed; unmatched or valueless, it falls
    back to its own greedy expected-profit action.

    The matching decomposes over connected components of the courier/grid
    sharing graph, and only the requesting courier's match is returned, so
    rows outside its component are dropped before any profit estimation.
    """
    world = snapshot.world
    rows = [
        v for v in snapshot.couriers
        if v.busy_until <= snapshot.now + AVAILABILITY_WINDOW_MINUTES
    ]
    if not any(v.id == courier.id for v in rows):
        rows.append(courier)
    rows.sort(key=lambda v: v.id)

    candidates = {v.id: _candidate_grids(snapshot, v) for v in rows}
    rows = _sharing_component(rows, candidates, courier.id)

    col_ids: list[int] = []
    col_pos: dict[int, int] = {}
    entries: dict[tuple[int, int], tuple[float, int]] = {}
    for v in rows:
        for g in candidates[v.id]:
            rate, patrol = _best_patrol_rate(
                snapshot, v.free_position, v.busy_until, g, v.speed_km_per_min
            )
            if g not in col_pos:
                col_pos[g] = len(col_ids)
                col_ids.append(g)
            entries[(v.id, col_pos[g])] = (rate, patrol)

    if not col_ids:
        return ghep(snapshot, courier)

    n, m = len(rows), len(col_ids)
    # Real columns a courier cannot reach are forbidden (negative); n shared
    # zero-weight idle columns guarantee rows <= cols and a harmless escape,
    # so forbidden edges are never matched.
    w = np.full((n, m + n), -1.0)
    w[:, m:] = 0.0
    row_of = {v.id: k for k, v in enumerate(rows)}
    for (cid, j), (rate, _patrol) in entries.items():
        w[row_of[cid], j] = rate

    if n == 1:
        j = int(np.argmax(w[0, :m]))
        matches = {0: j} if w[0, j] > 0 else {}
    else:
        row_to_col, _u, _v = _jv_assign(-w)
        matches = {i: int(c) for i, c in enumerate(row_to_col) if c < m and w[i, c] > 0}

    me = row_of[courier.id]
    if me in matches:
        j = matches[me]
        target = col_ids[j]
        _rate, patrol = entries[(courier.id, j)]
        from_grid = world.grid_of_point(courier.position)
        return _action_for_target(world, from_grid, target, patrol)
    return ghep(snapshot, courier)


POLICIES = {
    "random": random_policy,
    "ghav": ghav,
    "ghep": ghep,
    "mbm": mbm,
}
