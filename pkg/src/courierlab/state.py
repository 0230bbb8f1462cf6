"""Image-like policy inputs: stacked channels over the courier's 9x9 window.

Channel stack, in fixed order (row-major flattening: channel, then window
row dy=-4..4, then column dx=-4..4):

  0  courier count per grid            / fleet size
  1  pending request count             / 10
  2  total pending price               / 30
  3  grid distance to the center cell  / max distance in window
  4+ (EP variant) predicted profit rate of the action targeting the cell
     with patrol 0/10/20/30 minutes, zero outside the central 5x5

Cells beyond the board edge are zero in every channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import NEIGHBORHOOD_RADIUS, PATROL_CHOICES
from .routing import estimate_profit_from

WINDOW_RADIUS = 4
WINDOW = 2 * WINDOW_RADIUS + 1

BASIC_CHANNELS = 4
EP_CHANNELS = BASIC_CHANNELS + len(PATROL_CHOICES)

VARIANTS = ("basic", "ep")


@dataclass(frozen=True)
class Normalizers:
    """Fixed scale divisors keeping raw channel values O(1)."""

    count: float = 10.0
    price: float = 30.0
    ep_rate: float = 1.0


DEFAULT_NORMALIZERS = Normalizers()


def n_channels(variant: str) -> int:
    if variant == "basic":
        return BASIC_CHANNELS
    if variant == "ep":
        return EP_CHANNELS
    raise ValueError(f"unknown state variant {variant!r}; choose from {VARIANTS}")


def input_dim(variant: str) -> int:
    return n_channels(variant) * WINDOW * WINDOW


@dataclass
class StateFeatures:
    channels: np.ndarray  # (C, 9, 9)
    variant: str
    courier_id: int
    time: float

    @property
    def flat(self) -> np.ndarray:
        return self.channels.reshape(-1)


def encode(
    snapshot,
    courier,
    variant: str = "basic",
    norms: Normalizers = DEFAULT_NORMALIZERS,
) -> StateFeatures:
    """Build the window channels for one courier at the snapshot instant."""
    C = n_channels(variant)
    world = snapshot.world
    grid = world.grid_of_point(courier.position)
    gx, gy = world.grid_coords(grid)
    channels = np.zeros((C, WINDOW, WINDOW))
    fleet = max(snapshot.fleet_size, 1)

    matrix = world.distance_km_matrix
    distances = np.zeros((WINDOW, WINDOW))
    in_board = np.zeros((WINDOW, WINDOW), dtype=bool)
    for wy, dy in enumerate(range(-WINDOW_RADIUS, WINDOW_RADIUS + 1)):
        for wx, dx in enumerate(range(-WINDOW_RADIUS, WINDOW_RADIUS + 1)):
            cx, cy = gx + dx, gy + dy
            if not (0 <= cx < world.width and 0 <= cy < world.height):
                continue
            g = world.grid_index(cx, cy)
            in_board[wy, wx] = True
            channels[0, wy, wx] = snapshot.courier_count[g] / fleet
            channels[1, wy, wx] = snapshot.pending_count[g] / norms.count
            channels[2, wy, wx] = snapshot.pending_price[g] / norms.price
            if matrix is None:
                distances[wy, wx] = float(np.hypot(dx, dy))
            else:
                distances[wy, wx] = float(matrix[grid, g])
    peak = distances[in_board].max() if in_board.any() else 0.0
    if peak > 0:
        channels[3][in_board] = distances[in_board] / peak

    if variant == "ep":
        r = NEIGHBORHOOD_RADIUS
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                cx, cy = gx + dx, gy + dy
                if not (0 <= cx < world.width and 0 <= cy < world.height):
                    continue
                target = world.grid_index(cx, cy)
                wy, wx = dy + WINDOW_RADIUS, dx + WINDOW_RADIUS
                if not snapshot.pending_count[target]:
                    continue  # rate is 0 for every patrol
                for k, patrol in enumerate(PATROL_CHOICES):
                    if patrol == 0:
                        continue  # nothing collectible, rate 0
                    price, minutes = estimate_profit_from(
                        courier.position,
                        snapshot.now,
                        target,
                        patrol,
                        snapshot,
                        courier.speed_km_per_min,
                    )
                    rate = price / minutes if minutes > 0 else 0.0
                    channels[BASIC_CHANNELS + k, wy, wx] = rate / norms.ep_rate

    return StateFeatures(
        channels=channels, variant=variant, courier_id=courier.id, time=snapshot.now
    )
