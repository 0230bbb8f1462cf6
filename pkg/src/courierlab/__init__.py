"""courierlab: a simulation lab for dynamic courier dispatching.

Generate stochastic pickup-request streams over a grid city, dispatch
couriers with online policies or a learned multi-agent PPO policy, and score
served-request revenue over a fixed working horizon.
"""

from .domain import (
    ActionSpec,
    Courier,
    CourierStatus,
    GridType,
    GridWorld,
    Point,
    Request,
    RequestStatus,
    action_decode,
    action_index,
    travel_time,
)
from .engine import EpisodeResult, Simulation, Snapshot, run_episode
from .routing import Route, estimate_profit, plan_route, validate_route
from .scenario import (
    ProblemInstance,
    ScenarioConfig,
    apply_dod,
    build_instance,
    generate_instance,
    load_instance,
    preset,
    save_instance,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSpec",
    "Courier",
    "CourierStatus",
    "EpisodeResult",
    "GridType",
    "GridWorld",
    "Point",
    "ProblemInstance",
    "Request",
    "RequestStatus",
    "Route",
    "ScenarioConfig",
    "Simulation",
    "Snapshot",
    "action_decode",
    "action_index",
    "apply_dod",
    "build_instance",
    "estimate_profit",
    "generate_instance",
    "load_instance",
    "plan_route",
    "preset",
    "run_episode",
    "save_instance",
    "travel_time",
    "validate_route",
]
