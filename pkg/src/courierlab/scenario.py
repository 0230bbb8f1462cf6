"""Problem-instance generation: spatio-temporal Poisson demand over a zoned grid.

A scenario fixes the board, the per-zone-per-period arrival-rate matrix, the
service time window parameters, the degree of dynamism, and the fleet size.
Instances are pure functions of (config, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .domain import (
    ConfigurationError,
    GridType,
    GridWorld,
    Point,
    Request,
    load_distance_matrix,
)

# Arrival rates per grid per minute, one entry per period, by zone type.
INTENSE_RATES = (0.05, 0.00, 0.00, 0.10, 0.04, 0.00, 0.00, 0.05)
PERIPHERAL_RATES = (0.01, 0.06, 0.01, 0.01, 0.01, 0.06, 0.05, 0.01)

ZONE_FRACTIONS = (0.05, 0.15, 0.80)  # intense, peripheral, empty

SERVICE_TIME_CHOICES = (2, 3, 4)
PRICE_CHOICES = (1, 2, 3, 4, 5)

def default_rate_matrix() -> dict[GridType, tuple[float, ...]]:
    return {
        GridType.INTENSE: INTENSE_RATES,
        GridType.PERIPHERAL: PERIPHERAL_RATES,
        GridType.EMPTY: (0.0,) * len(INTENSE_RATES),
    }


def zone_counts(n_grids: int, fractions=ZONE_FRACTIONS) -> tuple[int, int, int]:
    """Split n_grids into (intense, peripheral, empty) by largest remainder."""
    raw = [f * n_grids for f in fractions]
    counts = [int(math.floor(r)) for r in raw]
    remainders = [r - c for r, c in zip(raw, counts)]
    for _ in range(n_grids - sum(counts)):
        i = int(np.argmax(remainders))
        counts[i] += 1
        remainders[i] = -1.0
    return tuple(counts)


def two_corner_layout(width: int, height: int, fractions=ZONE_FRACTIONS) -> tuple[GridType, ...]:
    """Zone map with an intense pocket in the north-east corner and the
    peripheral mass in the south-west, so demand alternates between opposite
    corners as the rate schedule shifts across periods."""
    n = width * height
    n_intense, n_peripheral, _ = zone_counts(n, fractions)

    def dist(g: int, px: float, py: float) -> float:
        return math.hypot(g % width + 0.5 - px, g // width + 0.5 - py)

    types = [GridType.EMPTY] * n
    ne = sorted(range(n), key=lambda g: (dist(g, width - 1.5, height - 1.5), g))[:n_intense]
    for g in ne:
        types[g] = GridType.INTENSE
    taken = set(ne)
    sw = sorted(
        (g for g in range(n) if g not in taken), key=lambda g: (dist(g, 1.5, 1.5), g)
    )[:n_peripheral]
    for g in sw:
        types[g] = GridType.PERIPHERAL
    return tuple(types)


def canonical_layout(width: int, height: int, fractions=ZONE_FRACTIONS) -> tuple[GridType, ...]:
    """Deterministic fixed zone map shared by all fixed-zone scenarios.

    The demand region is an ellipse stretched along the board's south-west
    diagonal (an urban corridor): it contains the central courier depot, and
    its tail runs toward the origin corner so that couriers sliding along the
    board edges re-enter demand instead of stranding. Intense cells form a
    core at the corridor's midpoint plus four smaller pockets around it.
    """
    n = width * height
    n_intense, n_peripheral, _ = zone_counts(n, fractions)

    f1 = (0.125 * width, 0.125 * height)
    f2 = (0.625 * width, 0.625 * height)

    def dist(g: int, px: float, py: float) -> float:
        return math.hypot(g % width + 0.5 - px, g // width + 0.5 - py)

    order = sorted(range(n), key=lambda g: (dist(g, *f1) + dist(g, *f2), g))
    demand = order[: n_intense + n_peripheral]

    cx, cy = (f1[0] + f2[0]) / 2, (f1[1] + f2[1]) / 2
    core_size = max(1, round(0.6 * n_intense))
    types = [GridType.EMPTY] * n
    core = sorted(demand, key=lambda g: (dist(g, cx, cy), g))[:core_size]
    for g in core:
        types[g] = GridType.INTENSE
    taken = set(core)
    pockets = [f1, f2, (cx - 0.16 * width, cy + 0.05 * height), (cx + 0.05 * width, cy - 0.16 * height)]
    remaining = n_intense - core_size
    for k, (px, py) in enumerate(pockets):
        share = remaining // len(pockets) + (1 if k < remaining % len(pockets) else 0)
        cells = sorted(
            (g for g in demand if g not in taken), key=lambda g: (dist(g, px, py), g)
        )[:share]
        for g in cells:
            types[g] = GridType.INTENSE
            taken.add(g)
    for g in demand:
        if types[g] is GridType.EMPTY:
            types[g] = GridType.PERIPHERAL
    return tuple(types)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    width: int = 20
    height: int = 20
    cell_size_km: float = 1.0
    horizon_minutes: float = 480.0
    n_periods: int = 8
    rate_matrix: dict[GridType, tuple[float, ...]] = field(default_factory=default_rate_matrix)
    rate_scale: float = 1.0
    zone_mode: str = "fixed"  # "fixed" | "random"
    zone_probs: tuple[float, float, float] = ZONE_FRACTIONS
    fixed_layout: Optional[tuple[GridType, ...]] = None
    delta_t1: float = 0.0
    delta_t2: float = 60.0
    dod: float = 0.9
    courier_count: int = 10
    courier_start_grid: tuple[int, int] = (10, 10)
    speed_km_per_min: float = 0.5
    distance_matrix_path: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.horizon_minutes <= 0 or self.n_periods < 1:
            raise ConfigurationError("horizon and period count must be positive")
        if self.horizon_minutes % self.n_periods:
            raise ConfigurationError(
                f"horizon {self.horizon_minutes} not divisible into {self.n_periods} periods"
            )
        if self.zone_mode not in ("fixed", "random"):
            raise ConfigurationError(f"unknown zone_mode {self.zone_mode!r}")
        if not 0.0 <= self.dod <= 1.0:
            raise ConfigurationError(f"dod must be in [0, 1], got {self.dod}")
        if self.rate_scale < 0:
            raise ConfigurationError("rate_scale must be non-negative")
        for zone, rates in self.rate_matrix.items():
            if len(rates) != self.n_periods:
                raise ConfigurationError(
                    f"rate row for {zone.value} has {len(rates)} periods, expected {self.n_periods}"
                )
            if any(r < 0 for r in rates):
                raise ConfigurationError(f"negative arrival rate in {zone.value} row")

    @property
    def period_minutes(self) -> float:
        return self.horizon_minutes / self.n_periods

    def expected_requests(self) -> float:
        """Sum of Poisson means over the board under the fixed/expected layout."""
        if self.zone_mode == "fixed":
            layout = self.fixed_layout or canonical_layout(self.width, self.height, self.zone_probs)
            counts = {
                zone: sum(1 for t in layout if t is zone)
                for zone in GridType
            }
        else:
            n = self.width * self.height
            counts = {
                GridType.INTENSE: self.zone_probs[0] * n,
                GridType.PERIPHERAL: self.zone_probs[1] * n,
                GridType.EMPTY: self.zone_probs[2] * n,
            }
        total = 0.0
        for zone, n_zone in counts.items():
            total += n_zone * self.period_minutes * sum(self.rate_matrix[zone]) * self.rate_scale
        return total


@dataclass
class ProblemInstance:
    """A full day's request stream plus world geometry: the unit of simulation."""

    world: GridWorld
    requests: list[Request]
    horizon: float
    meta: dict

    def total_price(self) -> float:
        return float(sum(r.price for r in self.requests))


def _build_world(config: ScenarioConfig, rng: np.random.Generator) -> GridWorld:
    if config.zone_mode == "fixed":
        layout = config.fixed_layout or canonical_layout(
            config.width, config.height, config.zone_probs
        )
    else:
        draws = rng.choice(3, size=config.width * config.height, p=list(config.zone_probs))
        zones = (GridType.INTENSE, GridType.PERIPHERAL, GridType.EMPTY)
        layout = tuple(zones[d] for d in draws)
    matrix = None
    if config.distance_matrix_path is not None:
        matrix = load_distance_matrix(config.distance_matrix_path)
    return GridWorld(
        width=config.width,
        height=config.height,
        cell_size_km=config.cell_size_km,
        grid_types=layout,
        distance_km_matrix=matrix,
    )


def generate_instance(config: ScenarioConfig, seed: Optional[int] = None) -> ProblemInstance:
    """Draw one day of demand: a homogeneous Poisson process per (grid, period).

    Arrival gaps are i.i.d. exponentials truncated at each period's end. Every
    request gets a uniform location inside its grid, a window
    [t + dT1, t + dT1 + dT2], and uniform service time and price.
    """
    if seed is None:
        seed = config.seed
    rng = np.random.default_rng(seed)
    world = _build_world(config, rng)
    period = config.period_minutes

    raw: list[tuple[float, int]] = []
    for g in range(world.n_grids):
        rates = config.rate_matrix[world.grid_type(g)]
        for m in range(config.n_periods):
            lam = rates[m] * config.rate_scale
            if lam <= 0:
                continue
            t = m * period
            end = (m + 1) * period
            while True:
                t += rng.exponential(1.0 / lam)
                if t >= end:
                    break
                raw.append((t, g))

    raw.sort(key=lambda item: item[0])
    requests = []
    for rid, (t, g) in enumerate(raw):
        gx, gy = world.grid_coords(g)
        loc = Point(
            (gx + rng.random()) * config.cell_size_km,
            (gy + rng.random()) * config.cell_size_km,
        )
        earliest = t + config.delta_t1
        requests.append(
            Request(
                id=rid,
                location=loc,
                grid=g,
                arrival_time=t,
                earliest=earliest,
                latest=earliest + config.delta_t2,
                service_time=float(rng.choice(SERVICE_TIME_CHOICES)),
                price=float(rng.choice(PRICE_CHOICES)),
            )
        )

    meta = {
        "scenario": config.name,
        "seed": int(seed),
        "dod": 1.0,  # raw stream: nothing advanced yet
        "courier_count": config.courier_count,
        "courier_start_grid": list(config.courier_start_grid),
        "speed_km_per_min": config.speed_km_per_min,
        "distance_matrix_path": config.distance_matrix_path,
    }
    return ProblemInstance(world=world, requests=requests, horizon=config.horizon_minutes, meta=meta)


def apply_dod(instance: ProblemInstance, dod: float, seed: int) -> ProblemInstance:
    """Reveal a random ceil((1 - dod) * N) subset of requests at time zero.

    Advanced requests get their windows recomputed from the new arrival time,
    keeping their original dT1/dT2 offsets. Returns a new instance; the input
    is untouched.
    """
    if not 0.0 <= dod <= 1.0:
        raise ConfigurationError(f"dod must be in [0, 1], got {dod}")
    n = len(instance.requests)
    n_advance = math.ceil((1.0 - dod) * n)
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(n, size=n_advance, replace=False).tolist()) if n_advance else set()

    requests = []
    for pos, r in enumerate(instance.requests):
        if pos in chosen:
            dt1 = r.earliest - r.arrival_time
            dt2 = r.latest - r.earliest
            requests.append(
                replace(r, arrival_time=0.0, earliest=dt1, latest=dt1 + dt2)
            )
        else:
            requests.append(replace(r))
    requests.sort(key=lambda r: (r.arrival_time, r.id))

    meta = dict(instance.meta)
    meta["dod"] = dod
    return ProblemInstance(
        world=instance.world, requests=requests, horizon=instance.horizon, meta=meta
    )


def build_instance(config: ScenarioConfig, seed: Optional[int] = None) -> ProblemInstance:
    """generate_instance followed by the scenario's degree-of-dynamism rewrite."""
    if seed is None:
        seed = config.seed
    instance = generate_instance(config, seed)
    # Distinct stream for the subset draw so demand and dynamism decouple.
    return apply_dod(instance, config.dod, seed=seed + 0x5EED)


# ---------------------------------------------------------------------------
# Named presets


def _preset_base(**overrides) -> ScenarioConfig:
    defaults = dict(name="base")
    defaults.update(overrides)
    return ScenarioConfig(**defaults)


PRESETS = {
    "base": lambda: _preset_base(),
    "median": lambda: _preset_base(name="median", courier_count=30),
    "large": lambda: _preset_base(name="large", courier_count=100),
    "small_tw": lambda: _preset_base(name="small_tw", delta_t2=20.0),
    "low_dyn": lambda: _preset_base(name="low_dyn", dod=0.5),
    "random_grid": lambda: _preset_base(name="random_grid", zone_mode="random"),
    # Desk-scale world used by the learning checks: 8x8 board, 4 couriers,
    # rates scaled so the expected daily demand is exactly 150 requests, a
    # 30-minute window, and demand alternating between opposite corners so
    # positioning quality decides the score.
    "desk": lambda: _preset_base(
        name="desk",
        width=8,
        height=8,
        courier_count=4,
        courier_start_grid=(4, 4),
        rate_scale=150.0 / 175.2,
        delta_t2=30.0,
        fixed_layout=two_corner_layout(8, 8),
    ),
}


def preset(name: str, seed: int = 0) -> ScenarioConfig:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown scenario {name!r}; choose from {sorted(PRESETS)}"
        ) from None
    return replace(factory(), seed=seed)


# ---------------------------------------------------------------------------
# Instance files


class SchemaError(ValueError):
    """Instance file violates the expected schema; message names the field."""


def _expect(mapping, key, kind, path):
    if key not in mapping:
        raise SchemaError(f"missing field {path}.{key}" if path else f"missing field {key}")
    value = mapping[key]
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise SchemaError(f"field {path}.{key} must be a number")
        return float(value)
    if not isinstance(value, kind):
        raise SchemaError(f"field {path}.{key} must be {kind.__name__}")
    return value


def instance_to_dict(instance: ProblemInstance) -> dict:
    world = instance.world
    matrix_path = instance.meta.get("distance_matrix_path")
    return {
        "meta": instance.meta,
        "world": {
            "width": world.width,
            "height": world.height,
            "cell_km": world.cell_size_km,
            "grid_types": [t.value for t in world.grid_types],
            "distance": f"matrix:{matrix_path}" if matrix_path else "euclidean",
        },
        "horizon": instance.horizon,
        "requests": [
            {
                "id": r.id,
                "x": r.location.x,
                "y": r.location.y,
                "t": r.arrival_time,
                "earliest": r.earliest,
                "latest": r.latest,
                "service": r.service_time,
                "price": r.price,
            }
            for r in instance.requests
        ],
    }


def instance_from_dict(doc: dict) -> ProblemInstance:
    if not isinstance(doc, dict):
        raise SchemaError("instance document must be a JSON object")
    world_doc = _expect(doc, "world", dict, "")
    width = _expect(world_doc, "width", int, "world")
    height = _expect(world_doc, "height", int, "world")
    cell_km = _expect(world_doc, "cell_km", float, "world")
    type_names = _expect(world_doc, "grid_types", list, "world")
    try:
        grid_types = tuple(GridType(t) for t in type_names)
    except ValueError as e:
        raise SchemaError(f"field world.grid_types has an unknown zone name: {e}") from None
    distance = _expect(world_doc, "distance", str, "world")
    matrix = None
    if distance.startswith("matrix:"):
        matrix = load_distance_matrix(distance.split(":", 1)[1])
    elif distance != "euclidean":
        raise SchemaError("field world.distance must be 'euclidean' or 'matrix:<path>'")

    try:
        world = GridWorld(
            width=width,
            height=height,
            cell_size_km=cell_km,
            grid_types=grid_types,
            distance_km_matrix=matrix,
        )
    except ConfigurationError as e:
        raise SchemaError(f"field world is inconsistent: {e}") from None

    horizon = _expect(doc, "horizon", float, "")
    request_docs = _expect(doc, "requests", list, "")
    requests = []
    for k, rd in enumerate(request_docs):
        path = f"requests[{k}]"
        if not isinstance(rd, dict):
            raise SchemaError(f"field {path} must be an object")
        loc = Point(_expect(rd, "x", float, path), _expect(rd, "y", float, path))
        if not world.contains(loc):
            raise SchemaError(f"field {path} location outside the board")
        requests.append(
            Request(
                id=_expect(rd, "id", int, path),
                location=loc,
                grid=world.grid_of_point(loc),
                arrival_time=_expect(rd, "t", float, path),
                earliest=_expect(rd, "earliest", float, path),
                latest=_expect(rd, "latest", float, path),
                service_time=_expect(rd, "service", float, path),
                price=_expect(rd, "price", float, path),
            )
        )
    requests.sort(key=lambda r: (r.arrival_time, r.id))
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise SchemaError("field meta must be an object")
    return ProblemInstance(world=world, requests=requests, horizon=horizon, meta=meta)


def save_instance(instance: ProblemInstance, path) -> None:
    with open(path, "w") as f:
        json.dump(instance_to_dict(instance), f, indent=1)


def load_instance(path) -> ProblemInstance:
    with open(path) as f:
        return instance_from_dict(json.load(f))
