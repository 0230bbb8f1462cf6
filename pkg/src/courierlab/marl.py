"""Decentralized actor-critic training over the dispatch simulator.

All couriers wired to one learner share parameters and write into a joint
replay memory; each episode alternates a sampling stage (stochastic policy
rollouts with team reward shaping, value targets, and advantages computed at
collection time) and a learning stage (minibatch value regression plus
clipped-ratio policy ascent). A frozen copy of the value net supplies
bootstrap targets and refreshes every few episodes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import baselines
from .domain import ActionSpec, Courier, action_decode, action_index
from .engine import DecisionRecord, EpisodeResult, run_episode
from .nets import (
    AdamState,
    DenseNet,
    adam_step,
    backward,
    forward,
    forward_cached,
    greedy,
    init_dense,
    load_checkpoint,
    policy_distribution,
    sample,
    save_checkpoint,
)
from .scenario import ProblemInstance
from .state import DEFAULT_NORMALIZERS, Normalizers, encode, input_dim
from .domain import N_ACTIONS


@dataclass
class Transition:
    """One agent decision: the unit written to replay memory."""

    state: np.ndarray
    action: int
    behavior_prob: float
    reward: float
    shaped_reward: float
    next_state: Optional[np.ndarray]
    value_target: float
    advantage: float
    courier_id: int
    episode_id: int
    t_index: int


class ReplayMemory:
    """Fixed-capacity ring buffer with strict FIFO eviction.

    Hot fields are mirrored into preallocated arrays so minibatch gathers are
    single fancy-index operations.
    """

    def __init__(self, capacity: int = 20000):
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0
        self._states: Optional[np.ndarray] = None
        self._actions = np.zeros(capacity, dtype=np.int64)
        self._probs = np.zeros(capacity)
        self._targets = np.zeros(capacity)
        self._advantages = np.zeros(capacity)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        """Oldest to newest."""
        if len(self._items) < self.capacity:
            yield from self._items
        else:
            yield from self._items[self._next :]
            yield from self._items[: self._next]

    def add(self, t: Transition) -> None:
        if not 0.0 < t.behavior_prob <= 1.0:
            raise ValueError(f"behavior_prob {t.behavior_prob} outside (0, 1]")
        if not (math.isfinite(t.value_target) and math.isfinite(t.advantage)):
            raise ValueError("value_target and advantage must be finite")
        if self._states is None:
            self._states = np.zeros((self.capacity, len(t.state)))
        if len(self._items) < self.capacity:
            slot = len(self._items)
            self._items.append(t)
        else:
            slot = self._next
            self._items[slot] = t
            self._next = (self._next + 1) % self.capacity
        self._states[slot] = t.state
        self._actions[slot] = t.action
        self._probs[slot] = t.behavior_prob
        self._targets[slot] = t.value_target
        self._advantages[slot] = t.advantage

    def sample_batch(self, rng: np.random.Generator, batch_size: int) -> dict[str, np.ndarray]:
        if not self._items:
            raise ValueError("cannot sample from an empty memory")
        idx = rng.integers(0, len(self._items), size=batch_size)
        return {
            "states": self._states[idx],
            "actions": self._actions[idx],
            "probs": self._probs[idx],
            "targets": self._targets[idx],
            "advantages": self._advantages[idx],
        }


# ---------------------------------------------------------------------------
# Reward shaping and targets


def shape_reward(reward: float, team_rewards: list[float], alpha: float) -> float:
    """reward + alpha * mean of the team's raw rewards over the action's span."""
    team = float(np.mean(team_rewards)) if team_rewards else 0.0
    return reward + alpha * team


def shaped_rewards_for_episode(result: EpisodeResult, alpha: float) -> dict[tuple[int, int], float]:
    """Shaped reward per (courier, decision index).

    The team pool for an action spanning (start, completion] is every action
    of any courier completing strictly inside that window, plus always the
    action's own completion. A courier's previous action completes exactly at
    the next decision instant, so the open left end keeps it out.
    """
    completions = [
        (d.completion_time, d.courier_id, d.index, d.reward)
        for d in result.all_decisions()
        if d.completion_time is not None
    ]
    shaped = {}
    for d in result.all_decisions():
        if d.completion_time is None:
            continue
        team = [
            r
            for (ct, cid, idx, r) in completions
            if d.decision_time < ct <= d.completion_time
            and not (cid == d.courier_id and idx == d.index)
        ]
        team.append(d.reward)
        shaped[(d.courier_id, d.index)] = shape_reward(d.reward, team, alpha)
    return shaped


def compute_targets(
    states: list[np.ndarray],
    shaped: list[float],
    value_net: DenseNet,
    target_net: DenseNet,
    gamma: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-transition (value target, advantage) for one finished trajectory.

    Targets bootstrap one step through the frozen target net; advantages are
    the discounted shaped-reward tail minus the current value estimate, with
    a terminal bootstrap of zero at episode end.
    """
    n = len(states)
    if n != len(shaped):
        raise ValueError("trajectory is incomplete: states and rewards disagree")
    if n == 0:
        return np.zeros(0), np.zeros(0)
    stack = np.stack(states)
    v_now = forward(value_net, stack)[:, 0]
    targets = np.asarray(shaped, dtype=float).copy()
    if n > 1:
        v_next = forward(target_net, stack[1:])[:, 0]
        targets[:-1] += gamma * v_next
    tail = 0.0
    returns = np.zeros(n)
    for t in range(n - 1, -1, -1):
        tail = shaped[t] + gamma * tail
        returns[t] = tail
    return targets, returns - v_now


# ---------------------------------------------------------------------------
# Losses with analytic gradients (finite-difference checked in the tests)


def value_loss_and_grads(net: DenseNet, states, targets):
    y, cache = forward_cached(net, states)
    err = y[:, 0] - np.asarray(targets, dtype=float)
    loss = float(np.mean(err**2))
    grad_out = (2.0 * err / err.size)[:, None]
    return loss, backward(net, cache, grad_out)


def ppo_objective_and_grads(net: DenseNet, states, actions, old_probs, advantages, clip_eps):
    """Mean clipped surrogate and its gradient (an ascent direction)."""
    logits, cache = forward_cached(net, states)
    probs = policy_distribution(logits)
    b = len(actions)
    idx = np.arange(b)
    p_a = probs[idx, actions]
    rho = p_a / old_probs
    adv = np.asarray(advantages, dtype=float)
    clipped = np.clip(rho, 1 - clip_eps, 1 + clip_eps)
    per_sample = np.minimum(rho * adv, clipped * adv)
    objective = float(np.mean(per_sample))

    take_plain = rho * adv <= clipped * adv
    inside = (rho > 1 - clip_eps) & (rho < 1 + clip_eps)
    d_rho = np.where(take_plain, adv, adv * inside)
    coef = (d_rho / old_probs / b) * p_a
    grad_logits = -coef[:, None] * probs
    grad_logits[idx, actions] += coef
    return objective, backward(net, cache, grad_logits)


def value_update(
    memory: ReplayMemory,
    net: DenseNet,
    adam: AdamState,
    iterations: int,
    batch_size: int,
    rng: np.random.Generator,
) -> float:
    """N1 minibatch MSE steps toward the stored value targets; mean loss."""
    losses = []
    for _ in range(iterations):
        batch = memory.sample_batch(rng, batch_size)
        loss, grads = value_loss_and_grads(net, batch["states"], batch["targets"])
        adam_step(net.params(), grads, adam)
        losses.append(loss)
    return float(np.mean(losses)) if losses else 0.0


def policy_update(
    memory: ReplayMemory,
    net: DenseNet,
    adam: AdamState,
    iterations: int,
    batch_size: int,
    clip_eps: float,
    rng: np.random.Generator,
) -> float:
    """N2 minibatch ascent steps on the clipped surrogate; mean objective."""
    objectives = []
    for _ in range(iterations):
        batch = memory.sample_batch(rng, batch_size)
        objective, grads = ppo_objective_and_grads(
            net, batch["states"], batch["actions"], batch["probs"],
            batch["advantages"], clip_eps,
        )
        adam_step(net.params(), {k: -g for k, g in grads.items()}, adam)
        objectives.append(objective)
    return float(np.mean(objectives)) if objectives else 0.0


# ---------------------------------------------------------------------------
# Training configuration


@dataclass(frozen=True)
class FleetSpec:
    """A contiguous block of couriers driven by one policy handle."""

    name: str
    count: int
    policy: str = "marl"  # "marl" or a baseline name
    learner: Optional[str] = None  # learner key for marl fleets

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"fleet {self.name!r} must have at least one courier")
        if self.policy == "marl" and self.learner is None:
            object.__setattr__(self, "learner", "shared")
        if self.policy != "marl" and self.policy not in baselines.POLICIES:
            raise ValueError(f"unknown fleet policy {self.policy!r}")


@dataclass(frozen=True)
class ImitationSchedule:
    mode: str = "none"  # "none" | "full" | "mixed"
    until_episode: int = 0
    prob: float = 0.2
    expert: str = "ghep"

    def expert_drive(self, episode: int, rng: np.random.Generator) -> bool:
        if episode >= self.until_episode or self.mode == "none":
            return False
        if self.mode == "full":
            return True
        if self.mode == "mixed":
            return bool(rng.random() < self.prob)
        raise ValueError(f"unknown imitation mode {self.mode!r}")


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 10000
    gamma: float = 0.8
    alpha: float = 0.5
    n1: int = 10
    n2: int = 10
    batch_size: int = 1024
    lr: float = 5e-4
    clip_eps: float = 0.2
    target_refresh: int = 10
    memory_capacity: int = 20000
    hidden: int = 200
    variant: str = "basic"
    normalizers: Normalizers = DEFAULT_NORMALIZERS
    imitation: ImitationSchedule = ImitationSchedule()
    fleets: Optional[tuple[FleetSpec, ...]] = None
    eval_period: int = 50
    eval_mode: str = "greedy"

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {self.alpha}")
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError(f"clip_eps must be in (0, 1), got {self.clip_eps}")


@dataclass
class Learner:
    name: str
    variant: str
    policy: DenseNet
    value: DenseNet
    target: DenseNet
    memory: ReplayMemory
    policy_adam: AdamState
    value_adam: AdamState
    courier_ids: list[int] = field(default_factory=list)


@dataclass
class TrainResult:
    learners: dict[str, Learner]
    curve: list[dict]
    final_eval: dict
    config: TrainConfig


class MarlPolicy:
    """Inference-time dispatcher around a trained policy net."""

    def __init__(
        self,
        policy_net: DenseNet,
        variant: str,
        norms: Normalizers = DEFAULT_NORMALIZERS,
        mode: str = "greedy",
    ):
        self.net = policy_net
        self.variant = variant
        self.norms = norms
        self.mode = mode

    def __call__(self, snapshot, courier, rng: np.random.Generator) -> ActionSpec:
        flat = encode(snapshot, courier, self.variant, self.norms).flat
        probs = policy_distribution(forward(self.net, flat))
        a = greedy(probs) if self.mode == "greedy" else sample(probs, rng)
        return action_decode(a)


def save_policy(path, learner: Learner, norms: Normalizers) -> None:
    save_checkpoint(
        path,
        {"policy": learner.policy, "value": learner.value},
        meta={
            "variant": learner.variant,
            "normalizers": {"count": norms.count, "price": norms.price, "ep_rate": norms.ep_rate},
            "learner": learner.name,
        },
    )


def load_policy(path, mode: str = "greedy") -> MarlPolicy:
    nets, meta = load_checkpoint(path)
    norms = Normalizers(**meta.get("normalizers", {}))
    return MarlPolicy(nets["policy"], meta.get("variant", "basic"), norms, mode=mode)


# ---------------------------------------------------------------------------
# The training loop


def _build_fleet(specs: tuple[FleetSpec, ...], instance: ProblemInstance) -> list[Courier]:
    meta = instance.meta
    gx, gy = meta.get("courier_start_grid", (10, 10))
    start = instance.world.grid_center(instance.world.grid_index(int(gx), int(gy)))
    speed = float(meta.get("speed_km_per_min", 0.5))
    couriers = []
    cid = 0
    for spec in specs:
        for _ in range(spec.count):
            couriers.append(
                Courier(id=cid, position=start, speed_km_per_min=speed, fleet=spec.name)
            )
            cid += 1
    return couriers


class _Collector:
    """Per-episode record of what each learned courier saw and chose."""

    def __init__(self):
        self.rows: dict[int, list[tuple[np.ndarray, int, float]]] = {}
        self.entropies: list[float] = []

    def add(self, courier_id: int, flat_state, action: int, prob: float, entropy: float):
        self.rows.setdefault(courier_id, []).append((flat_state, action, prob))
        self.entropies.append(entropy)


def _entropy(probs: np.ndarray) -> float:
    p = probs[probs > 0]
    return float(-(p * np.log(p)).sum())


def _sampling_dispatcher(
    specs: tuple[FleetSpec, ...],
    learners: dict[str, Learner],
    config: TrainConfig,
    episode: int,
    collector: _Collector,
):
    by_name = {s.name: s for s in specs}
    expert = baselines.POLICIES[config.imitation.expert]

    def dispatch(snapshot, courier, rng):
        spec = by_name[courier.fleet]
        if spec.policy != "marl":
            return baselines.POLICIES[spec.policy](snapshot, courier, rng)
        learner = learners[spec.learner]
        flat = encode(snapshot, courier, learner.variant, config.normalizers).flat
        probs = policy_distribution(forward(learner.policy, flat))
        if config.imitation.expert_drive(episode, rng):
            a = action_index(expert(snapshot, courier, rng))
        else:
            a = sample(probs, rng)
        collector.add(courier.id, flat, a, float(probs[a]), _entropy(probs))
        return a

    return dispatch


def evaluation_dispatcher(
    specs: tuple[FleetSpec, ...],
    learners: dict[str, Learner],
    config: TrainConfig,
    mode: str = "greedy",
):
    """Dispatcher wiring each fleet to its trained policy (or baseline)."""
    by_name = {s.name: s for s in specs}
    policies = {
        key: MarlPolicy(l.policy, l.variant, config.normalizers, mode=mode)
        for key, l in learners.items()
    }

    def dispatch(snapshot, courier, rng):
        spec = by_name[courier.fleet]
        if spec.policy != "marl":
            return baselines.POLICIES[spec.policy](snapshot, courier, rng)
        return policies[spec.learner](snapshot, courier, rng)

    return dispatch


def _collect_transitions(
    result: EpisodeResult,
    collector: _Collector,
    learner: Learner,
    courier_ids: list[int],
    config: TrainConfig,
    episode: int,
) -> int:
    shaped_map = shaped_rewards_for_episode(result, config.alpha)
    added = 0
    for cid in courier_ids:
        recs: list[DecisionRecord] = result.decisions.get(cid, [])
        rows = collector.rows.get(cid, [])
        if len(recs) != len(rows):
            raise RuntimeError(
                f"courier {cid}: {len(recs)} decisions but {len(rows)} collected states"
            )
        if not recs:
            continue
        states = [flat for flat, _a, _p in rows]
        shaped = [shaped_map[(cid, r.index)] for r in recs]
        targets, advantages = compute_targets(
            states, shaped, learner.value, learner.target, config.gamma
        )
        for t, (rec, (flat, a, prob)) in enumerate(zip(recs, rows)):
            if prob <= 0.0:
                continue  # rejected at insertion: behavior prob underflowed
            learner.memory.add(
                Transition(
                    state=flat,
                    action=a,
                    behavior_prob=prob,
                    reward=rec.reward,
                    shaped_reward=shaped[t],
                    next_state=states[t + 1] if t + 1 < len(states) else None,
                    value_target=float(targets[t]),
                    advantage=float(advantages[t]),
                    courier_id=cid,
                    episode_id=episode,
                    t_index=t,
                )
            )
            added += 1
    return added


def train(
    config: TrainConfig,
    train_instances: list[ProblemInstance],
    eval_instances: Optional[list[ProblemInstance]] = None,
    seed: int = 0,
    out_dir=None,
    learn: bool = True,
    progress: Optional[Callable[[dict], None]] = None,
) -> TrainResult:
    """Run the two-stage training loop over a set of problem instances.

    Every episode samples one training instance, rolls it out with the
    stochastic policy (all learned fleets), stores shaped/targeted
    transitions into each learner's memory, then runs the minibatch value and
    policy updates. Checkpoints and the learning curve land in out_dir when
    given.
    """
    if not train_instances:
        raise ValueError("need at least one training instance")
    specs = config.fleets
    if specs is None:
        count = int(train_instances[0].meta.get("courier_count", 10))
        specs = (FleetSpec(name="marl", count=count, policy="marl"),)

    dim = input_dim(config.variant)
    rng = np.random.default_rng(seed)
    learners: dict[str, Learner] = {}
    cid = 0
    for spec in specs:
        ids = list(range(cid, cid + spec.count))
        cid += spec.count
        if spec.policy != "marl":
            continue
        if spec.learner not in learners:
            pseed = int(rng.integers(2**31))
            vseed = int(rng.integers(2**31))
            value = init_dense(dim, 1, config.hidden, seed=vseed)
            learners[spec.learner] = Learner(
                name=spec.learner,
                variant=config.variant,
                policy=init_dense(dim, N_ACTIONS, config.hidden, seed=pseed),
                value=value,
                target=value.copy(),
                memory=ReplayMemory(config.memory_capacity),
                policy_adam=AdamState(lr=config.lr),
                value_adam=AdamState(lr=config.lr),
            )
        learners[spec.learner].courier_ids.extend(ids)
    if not learners:
        raise ValueError("no marl fleet to train")

    curve: list[dict] = []
    final_eval: dict = {}
    for episode in range(config.episodes):
        if learn and episode % config.target_refresh == 0:
            for l in learners.values():
                l.target.load_from(l.value)

        instance = train_instances[int(rng.integers(len(train_instances)))]
        collector = _Collector()
        dispatcher = _sampling_dispatcher(specs, learners, config, episode, collector)
        result = run_episode(
            instance,
            dispatcher,
            seed=int(rng.integers(2**31)),
            couriers=_build_fleet(specs, instance),
        )

        value_losses, objectives = [], []
        for l in learners.values():
            _collect_transitions(result, collector, l, l.courier_ids, config, episode)
            if learn and len(l.memory):
                value_losses.append(
                    value_update(l.memory, l.value, l.value_adam, config.n1,
                                 config.batch_size, rng)
                )
                objectives.append(
                    policy_update(l.memory, l.policy, l.policy_adam, config.n2,
                                  config.batch_size, config.clip_eps, rng)
                )

        row = {
            "episode": episode,
            "train_score": result.score,
            "eval_score": "",
            "value_loss": float(np.mean(value_losses)) if value_losses else 0.0,
            "mean_entropy": float(np.mean(collector.entropies)) if collector.entropies else 0.0,
        }

        last = episode == config.episodes - 1
        if eval_instances and ((episode + 1) % config.eval_period == 0 or last):
            eval_out = evaluate(specs, learners, config, eval_instances, seed=seed)
            row["eval_score"] = eval_out["score"]
            if last:
                final_eval = eval_out
        curve.append(row)
        if progress is not None:
            progress(row)

    if eval_instances and not final_eval:
        final_eval = evaluate(specs, learners, config, eval_instances, seed=seed)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for key, l in learners.items():
            save_policy(out / f"checkpoint_{key}.npz", l, config.normalizers)
        write_curve(out / "curve.csv", curve)

    return TrainResult(learners=learners, curve=curve, final_eval=final_eval, config=config)


def evaluate(
    specs: tuple[FleetSpec, ...],
    learners: dict[str, Learner],
    config: TrainConfig,
    instances: list[ProblemInstance],
    seed: int = 0,
) -> dict:
    """Deterministic greedy evaluation: mean score and per-fleet revenue."""
    dispatcher = evaluation_dispatcher(specs, learners, config, mode=config.eval_mode)
    scores, revenue_sums = [], {}
    for k, instance in enumerate(instances):
        result = run_episode(
            instance, dispatcher, seed=seed * 1_000_003 + k,
            couriers=_build_fleet(specs, instance),
        )
        scores.append(result.score)
        for tag, rev in result.fleet_revenue().items():
            revenue_sums[tag] = revenue_sums.get(tag, 0.0) + rev
    n = max(len(instances), 1)
    return {
        "score": float(np.mean(scores)) if scores else 0.0,
        "scores": scores,
        "fleet_revenue": {tag: s / n for tag, s in sorted(revenue_sums.items())},
    }


def write_curve(path, curve: list[dict]) -> None:
    fields = ["episode", "train_score", "eval_score", "value_loss", "mean_entropy"]
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fields)
        writer.writeheader()
        for row in curve:
            writer.writerow({k: row[k] for k in fields})
