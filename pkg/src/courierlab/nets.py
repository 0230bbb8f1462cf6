"""Minimal dense neural core: a one-hidden-layer ReLU net with manual
backprop, numerically stable softmax sampling, Adam, finite-difference
checking, and bit-exact checkpoints. Everything is float64 numpy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

HIDDEN_UNITS = 200


class NeuralError(ValueError):
    pass


@dataclass
class DenseNet:
    """input -> hidden ReLU -> linear head (logits or a scalar value)."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def output_dim(self) -> int:
        return self.W2.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        return {"W1": self.W1, "b1": self.b1, "W2": self.W2, "b2": self.b2}

    def copy(self) -> "DenseNet":
        return DenseNet(self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy())

    def load_from(self, other: "DenseNet") -> None:
        for name, p in self.params().items():
            p[...] = other.params()[name]


def init_dense(input_dim: int, output_dim: int, hidden: int = HIDDEN_UNITS, seed: int = 0) -> DenseNet:
    """Uniform +-1/sqrt(fan_in) init, deterministic in the seed."""
    rng = np.random.default_rng(seed)
    s1 = 1.0 / np.sqrt(input_dim)
    s2 = 1.0 / np.sqrt(hidden)
    return DenseNet(
        W1=rng.uniform(-s1, s1, size=(input_dim, hidden)),
        b1=rng.uniform(-s1, s1, size=hidden),
        W2=rng.uniform(-s2, s2, size=(hidden, output_dim)),
        b2=rng.uniform(-s2, s2, size=output_dim),
    )


def _as_batch(x: np.ndarray, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise NeuralError(f"input shape {x.shape} incompatible with input dim {dim}")
    return x, single


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    """Head output; (out,) for a single sample, (B, out) for a batch."""
    xb, single = _as_batch(x, net.input_dim)
    h = np.maximum(xb @ net.W1 + net.b1, 0.0)
    y = h @ net.W2 + net.b2
    return y[0] if single else y


def forward_cached(net: DenseNet, x: np.ndarray):
    """Forward pass keeping the intermediates backward() needs."""
    xb, _ = _as_batch(x, net.input_dim)
    z1 = xb @ net.W1 + net.b1
    h = np.maximum(z1, 0.0)
    y = h @ net.W2 + net.b2
    return y, (xb, z1, h)


def backward(net: DenseNet, cache, grad_out: np.ndarray) -> dict[str, np.ndarray]:
    """Analytic parameter gradients for an upstream d(loss)/d(output)."""
    xb, z1, h = cache
    g = np.asarray(grad_out, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    if not np.isfinite(g).all():
        raise NeuralError("non-finite upstream gradient")
    dW2 = h.T @ g
    db2 = g.sum(axis=0)
    dh = g @ net.W2.T
    dz1 = dh * (z1 > 0)
    dW1 = xb.T @ dz1
    db1 = dz1.sum(axis=0)
    return {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}


# ---------------------------------------------------------------------------
# Softmax policy head


def policy_distribution(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over action logits."""
    z = np.asarray(logits, dtype=float)
    if not np.isfinite(z).all():
        raise NeuralError("non-finite logits")
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sample(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Roulette-wheel draw: inverse CDF on a single uniform."""
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return min(int(np.searchsorted(cdf, u, side="right")), len(probs) - 1)


def greedy(probs: np.ndarray) -> int:
    """Highest-probability action; ties take the smallest index."""
    return int(np.argmax(probs))


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One bias-corrected minimization step, updating params in place."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads[name]
        if not np.isfinite(g).all():
            raise NeuralError(f"non-finite gradient for {name}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m[...] = state.beta1 * m + (1 - state.beta1) * g
        v[...] = state.beta2 * v + (1 - state.beta2) * g * g
        mhat = m / (1 - state.beta1**t)
        vhat = v / (1 - state.beta2**t)
        p -= state.lr * mhat / (np.sqrt(vhat) + state.eps)
        if not np.isfinite(p).all():
            raise NeuralError(f"non-finite parameter {name} after update")


# ---------------------------------------------------------------------------
# Finite-difference verification


def finite_difference_grads(
    loss_fn: Callable[[], float], params: dict[str, np.ndarray], h: float = 1e-6
) -> dict[str, np.ndarray]:
    """Central-difference gradient of loss_fn with respect to every coordinate."""
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        while not it.finished:
            idx = it.multi_index
            orig = p[idx]
            p[idx] = orig + h
            hi = loss_fn()
            p[idx] = orig - h
            lo = loss_fn()
            p[idx] = orig
            g[idx] = (hi - lo) / (2 * h)
            it.iternext()
        out[name] = g
    return out


def max_relative_error(
    analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray], floor: float = 1e-8
) -> float:
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name]
        denom = np.maximum(np.abs(a) + np.abs(n), floor)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


# ---------------------------------------------------------------------------
# Checkpoints

CHECKPOINT_VERSION = 1


def save_checkpoint(path, nets: dict[str, DenseNet], meta: Optional[dict] = None) -> None:
    """Binary shape-tagged arrays; round-trips bit-exactly."""
    arrays = {}
    for net_name, net in nets.items():
        for pname, p in net.params().items():
            arrays[f"{net_name}/{pname}"] = p
    header = {"version": CHECKPOINT_VERSION, "nets": sorted(nets), "meta": meta or {}}
    arrays["__header__"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[dict[str, DenseNet], dict]:
    with np.load(path) as data:
        header = json.loads(bytes(data["__header__"]).decode())
        if header.get("version") != CHECKPOINT_VERSION:
            raise NeuralError(f"unsupported checkpoint version {header.get('version')}")
        nets = {}
        for net_name in header["nets"]:
            nets[net_name] = DenseNet(
                W1=data[f"{net_name}/W1"].copy(),
                b1=data[f"{net_name}/b1"].copy(),
                W2=data[f"{net_name}/W2"].copy(),
                b2=data[f"{net_name}/b2"].copy(),
            )
    return nets, header["meta"]
