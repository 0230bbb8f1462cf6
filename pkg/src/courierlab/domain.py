"""Shared domain types: grid world geometry, requests, couriers, actions.

Everything downstream (demand generation, routing, the event engine, the
policies) works in terms of these types. Distances are kilometres, times are
minutes as continuous reals; there is no global tick.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

DEFAULT_SPEED_KM_PER_MIN = 0.5

PATROL_CHOICES = (0, 10, 20, 30)
NEIGHBORHOOD_RADIUS = 2  # actions target the 5x5 neighborhood
N_ACTIONS = 100


class GridType(Enum):
    INTENSE = "intense"
    PERIPHERAL = "peripheral"
    EMPTY = "empty"


class RequestStatus(Enum):
    PENDING = "pending"
    LOCKED = "locked"
    SERVED = "served"
    EXPIRED = "expired"


class CourierStatus(Enum):
    FREE = "free"
    WALKING = "walking"
    PICKING = "picking"


@dataclass(frozen=True)
class Point:
    """Continuous location in km, origin at the board's south-west corner."""

    x: float
    y: float


def euclidean_km(a: Point, b: Point) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


class ConfigurationError(ValueError):
    """Raised for invalid world/scenario wiring (bad matrix, bad ranges)."""


@dataclass(frozen=True)
class GridWorld:
    """Rectangular board of square cells with a per-grid zone type.

    Grid cells are addressed either by (gx, gy) coordinates or by a row-major
    index gy * width + gx. `distance_km_matrix`, when present, replaces
    grid-to-grid legs with supplied real distances; legs within one grid stay
    Euclidean because no finer data exists.
    """

    width: int = 20
    height: int = 20
    cell_size_km: float = 1.0
    grid_types: tuple[GridType, ...] = field(default=())
    distance_km_matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigurationError(f"board must be at least 1x1, got {self.width}x{self.height}")
        if self.cell_size_km <= 0:
            raise ConfigurationError(f"cell_size_km must be positive, got {self.cell_size_km}")
        if not self.grid_types:
            object.__setattr__(self, "grid_types", (GridType.EMPTY,) * self.n_grids)
        if len(self.grid_types) != self.n_grids:
            raise ConfigurationError(
                f"grid_types covers {len(self.grid_types)} grids, board has {self.n_grids}"
            )
        m = self.distance_km_matrix
        if m is not None:
            m = np.asarray(m, dtype=float)
            if m.shape != (self.n_grids, self.n_grids):
                raise ConfigurationError(
                    f"distance matrix shape {m.shape}, expected {(self.n_grids, self.n_grids)}"
                )
            if (m < 0).any():
                raise ConfigurationError("distance matrix has negative entries")
            if np.diagonal(m).any():
                raise ConfigurationError("distance matrix diagonal must be zero")
            m.setflags(write=False)
            object.__setattr__(self, "distance_km_matrix", m)

    @property
    def n_grids(self) -> int:
        return self.width * self.height

    @property
    def width_km(self) -> float:
        return self.width * self.cell_size_km

    @property
    def height_km(self) -> float:
        return self.height * self.cell_size_km

    def grid_index(self, gx: int, gy: int) -> int:
        if not (0 <= gx < self.width and 0 <= gy < self.height):
            raise ConfigurationError(f"grid ({gx}, {gy}) outside {self.width}x{self.height} board")
        return gy * self.width + gx

    def grid_coords(self, index: int) -> tuple[int, int]:
        if not (0 <= index < self.n_grids):
            raise ConfigurationError(f"grid index {index} outside [0, {self.n_grids})")
        return index % self.width, index // self.width

    def grid_of_point(self, p: Point) -> int:
        # Points exactly on the east/north board edge belong to the last cell.
        gx = min(int(p.x / self.cell_size_km), self.width - 1)
        gy = min(int(p.y / self.cell_size_km), self.height - 1)
        return self.grid_index(gx, gy)

    def grid_center(self, index: int) -> Point:
        gx, gy = self.grid_coords(index)
        return Point((gx + 0.5) * self.cell_size_km, (gy + 0.5) * self.cell_size_km)

    def grid_type(self, index: int) -> GridType:
        return self.grid_types[index]

    def contains(self, p: Point) -> bool:
        return 0.0 <= p.x <= self.width_km and 0.0 <= p.y <= self.height_km

    def clip_grid(self, gx: int, gy: int) -> tuple[int, int]:
        """Clamp grid coordinates to the board, per the action clipping rule."""
        return (
            min(max(gx, 0), self.width - 1),
            min(max(gy, 0), self.height - 1),
        )

    def distance_km(self, a: Point, b: Point) -> float:
        """Inter-point distance; matrix worlds use grid-to-grid real distances."""
        if self.distance_km_matrix is None:
            return euclidean_km(a, b)
        ga, gb = self.grid_of_point(a), self.grid_of_point(b)
        if ga == gb:
            return euclidean_km(a, b)
        return float(self.distance_km_matrix[ga, gb])


def travel_time(
    frm: Point,
    to: Point,
    world: GridWorld,
    speed_km_per_min: float = DEFAULT_SPEED_KM_PER_MIN,
) -> float:
    """Minutes to walk from `frm` to `to` at the given speed."""
    if speed_km_per_min <= 0:
        raise ConfigurationError(f"speed must be positive, got {speed_km_per_min}")
    return world.distance_km(frm, to) / speed_km_per_min


def load_distance_matrix(path) -> np.ndarray:
    """Read a grid-to-grid distance matrix CSV.

    Layout: header row of row-major grid indices, then one row per origin
    grid whose first column is the origin index; values in km.
    """
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ConfigurationError(f"{path}: empty distance matrix file")
    header = [int(v) for v in rows[0][1:]]
    n = len(header)
    if header != list(range(n)):
        raise ConfigurationError(f"{path}: header must list grid indices 0..{n - 1} in order")
    matrix = np.zeros((n, n), dtype=float)
    if len(rows) - 1 != n:
        raise ConfigurationError(f"{path}: expected {n} data rows, found {len(rows) - 1}")
    for row in rows[1:]:
        g_from = int(row[0])
        values = [float(v) for v in row[1:]]
        if len(values) != n:
            raise ConfigurationError(f"{path}: row {g_from} has {len(values)} values, expected {n}")
        matrix[g_from] = values
    return matrix


@dataclass
class Request:
    """One pickup order.

    The service window [earliest, latest] bounds the *start* of service;
    waiting on site until `earliest` is allowed. `latest` is a hard cutoff
    after which an unclaimed request expires.
    """

    id: int
    location: Point
    grid: int
    arrival_time: float
    earliest: float
    latest: float
    service_time: float
    price: float
    status: RequestStatus = RequestStatus.PENDING

    def alive_at(self, t: float) -> bool:
        return self.status is RequestStatus.PENDING and self.latest >= t


@dataclass
class Courier:
    """An agent with a position, a status machine, and accumulated revenue.

    `busy_until` is the estimated completion time of the current plan and
    equals the current time while the courier is Free.
    """

    id: int
    position: Point
    status: CourierStatus = CourierStatus.FREE
    speed_km_per_min: float = DEFAULT_SPEED_KM_PER_MIN
    fleet: str = "fleet"
    busy_until: float = 0.0
    revenue: float = 0.0


@dataclass(frozen=True)
class ActionSpec:
    """A dispatching decision: grid offset within the 5x5 neighborhood plus a
    patrol-minutes budget. Targets are clipped at the board edge."""

    dx: int
    dy: int
    patrol_minutes: int

    def __post_init__(self):
        r = NEIGHBORHOOD_RADIUS
        if not (-r <= self.dx <= r and -r <= self.dy <= r):
            raise ValueError(f"offset ({self.dx}, {self.dy}) outside the 5x5 neighborhood")
        if self.patrol_minutes not in PATROL_CHOICES:
            raise ValueError(f"patrol {self.patrol_minutes} not in {PATROL_CHOICES}")

    def target_grid(self, world: GridWorld, from_grid: int) -> int:
        gx, gy = world.grid_coords(from_grid)
        cx, cy = world.clip_grid(gx + self.dx, gy + self.dy)
        return world.grid_index(cx, cy)


def action_index(a: ActionSpec) -> int:
    """Bijective enumeration of the 100 actions."""
    side = 2 * NEIGHBORHOOD_RADIUS + 1
    return ((a.dy + NEIGHBORHOOD_RADIUS) * side + (a.dx + NEIGHBORHOOD_RADIUS)) * len(
        PATROL_CHOICES
    ) + a.patrol_minutes // 10


def action_decode(index: int) -> ActionSpec:
    if not (0 <= index < N_ACTIONS):
        raise ValueError(f"action index {index} outside [0, {N_ACTIONS})")
    side = 2 * NEIGHBORHOOD_RADIUS + 1
    cell, patrol_slot = divmod(index, len(PATROL_CHOICES))
    dy, dx = divmod(cell, side)
    return ActionSpec(
        dx=dx - NEIGHBORHOOD_RADIUS,
        dy=dy - NEIGHBORHOOD_RADIUS,
        patrol_minutes=PATROL_CHOICES[patrol_slot],
    )


def all_actions() -> list[ActionSpec]:
    return [action_decode(i) for i in range(N_ACTIONS)]


def make_grid_types(
    assignment: Sequence[GridType | str],
) -> tuple[GridType, ...]:
    """Normalize a sequence of types/names into the GridWorld field."""
    out = []
    for t in assignment:
        out.append(t if isinstance(t, GridType) else GridType(t))
    return tuple(out)
