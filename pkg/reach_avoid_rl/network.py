"""Fully connected tanh networks and their optimisers, in plain numpy.

Weights are stored ``(fan_in, fan_out)`` so a batch ``x`` of shape
``(N, fan_in)`` maps to ``x @ W + b``. Hidden layers use ``tanh``; the output
layer is linear.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from reach_avoid_rl.errors import DimensionError
from reach_avoid_rl.utils import SeedLike, as_generator, validate_choice

logger = logging.getLogger(__name__)

OPTIMIZERS = ("adam", "adamw")
Grads = Tuple[List[np.ndarray], List[np.ndarray]]


@dataclass
class NetworkParams:
    """Layer sizes, weight matrices and bias vectors of one MLP."""

    sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self) -> None:
        self.sizes = tuple(int(s) for s in self.sizes)
        if len(self.sizes) < 2:
            raise DimensionError("A network needs at least an input and an output layer")
        if len(self.weights) != len(self.sizes) - 1 or len(self.biases) != len(self.weights):
            raise DimensionError("Number of weight/bias arrays does not match the layer sizes")
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.sizes[i], self.sizes[i + 1])
            if w.shape != expected or b.shape != (self.sizes[i + 1],):
                raise DimensionError(
                    f"Layer {i}: expected W{expected} and b({self.sizes[i + 1]},), "
                    f"got W{w.shape} and b{b.shape}"
                )

    @classmethod
    def initialize(cls, sizes: Sequence[int], seed: SeedLike = None) -> "NetworkParams":
        """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` initialisation."""
        rng = as_generator(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(tuple(sizes), weights, biases)

    @classmethod
    def zeros(cls, sizes: Sequence[int]) -> "NetworkParams":
        weights = [np.zeros((i, o)) for i, o in zip(sizes[:-1], sizes[1:])]
        biases = [np.zeros(o) for o in sizes[1:]]
        return cls(tuple(sizes), weights, biases)

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.sizes[-1]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )

    def arrays(self) -> List[np.ndarray]:
        """All parameter arrays, weights first then biases (shared, not copied)."""
        return self.weights + self.biases

    def max_abs_difference(self, other: "NetworkParams") -> float:
        _check_same_shape(self, other)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.arrays(), other.arrays()))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "network",
            "sizes": list(self.sizes),
            "activation": "tanh",
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "NetworkParams":
        sizes = tuple(data["sizes"])
        layers = zip(data["weights"], sizes[:-1], sizes[1:])
        return cls(
            sizes,
            [np.asarray(w, dtype=float).reshape(i, o) for w, i, o in layers],
            [np.asarray(b, dtype=float) for b in data["biases"]],
        )


def _check_same_shape(a: NetworkParams, b: NetworkParams) -> None:
    if a.sizes != b.sizes:
        raise DimensionError(f"Network shapes differ: {a.sizes} vs {b.sizes}")


# =============================================================================
# Forward / backward
# =============================================================================


def forward_with_cache(params: NetworkParams, states: np.ndarray) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Forward pass returning the output and every layer's input activation."""
    x = np.atleast_2d(np.asarray(states, dtype=float))
    if x.shape[1] != params.n_inputs:
        raise DimensionError(f"Network expects {params.n_inputs} inputs, got {x.shape[1]}")
    activations = [x]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = x @ w + b
        x = z if i == last else np.tanh(z)
        if i != last:
            activations.append(x)
    return x, activations


def forward(params: NetworkParams, states: np.ndarray) -> np.ndarray:
    """Action values for one state ``(n,)`` or a batch ``(N, n)``."""
    states = np.asarray(states, dtype=float)
    out, _ = forward_with_cache(params, states)
    return out[0] if states.ndim == 1 else out


def backward(params: NetworkParams, activations: List[np.ndarray], grad_out: np.ndarray) -> Grads:
    """Backpropagate ``d loss / d output`` through the cached activations."""
    grad_w: List[np.ndarray] = [np.empty(0)] * len(params.weights)
    grad_b: List[np.ndarray] = [np.empty(0)] * len(params.biases)
    delta = grad_out
    for i in reversed(range(len(params.weights))):
        a = activations[i]
        grad_w[i] = a.T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (1.0 - a**2)
    return grad_w, grad_b


def action_mse(
    params: NetworkParams, states: np.ndarray, actions: np.ndarray, targets: np.ndarray
) -> Tuple[float, Grads]:
    """Mean squared error on the chosen action's output, with gradients."""
    out, cache = forward_with_cache(params, states)
    rows = np.arange(out.shape[0])
    err = out[rows, actions] - targets
    grad_out = np.zeros_like(out)
    grad_out[rows, actions] = 2.0 * err / out.shape[0]
    return float(np.mean(err**2)), backward(params, cache, grad_out)


def full_mse(params: NetworkParams, states: np.ndarray, targets: np.ndarray) -> Tuple[float, Grads]:
    """Mean squared error over every output against ``(N, outputs)`` targets."""
    out, cache = forward_with_cache(params, states)
    err = out - targets
    grad_out = 2.0 * err / err.size
    return float(np.mean(err**2)), backward(params, cache, grad_out)


# =============================================================================
# Optimisers
# =============================================================================


class Adam:
    """Adam, optionally with decoupled (AdamW) weight decay on every parameter."""

    def __init__(
        self,
        params: NetworkParams,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p) for p in params.arrays()]
        self.v = [np.zeros_like(p) for p in params.arrays()]

    def step(self, params: NetworkParams, grads: Grads, lr: Optional[float] = None) -> NetworkParams:
        """Update ``params`` in place and return them."""
        lr = self.lr if lr is None else lr
        self.t += 1
        flat_grads = list(grads[0]) + list(grads[1])
        bias1 = 1.0 - self.beta1**self.t
        bias2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params.arrays(), flat_grads, self.m, self.v):
            if g.shape != p.shape:
                raise DimensionError(f"Gradient shape {g.shape} does not match parameter {p.shape}")
            if self.weight_decay:
                p -= lr * self.weight_decay * p
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
        return params


def make_optimizer(name: str, params: NetworkParams, lr: float = 1e-3, weight_decay: float = 0.01) -> Adam:
    """``adam`` or ``adamw`` (decoupled decay ``weight_decay``)."""
    name = validate_choice(name, OPTIMIZERS, "optimizer")
    return Adam(params, lr=lr, weight_decay=weight_decay if name == "adamw" else 0.0)


def optimizer_step(opt: Adam, params: NetworkParams, grads: Grads, lr: float) -> NetworkParams:
    return opt.step(params, grads, lr=lr)


def soft_update(target: NetworkParams, online: NetworkParams, tau: float) -> NetworkParams:
    """``target <- (1 - tau) * target + tau * online``, in place on ``target``."""
    _check_same_shape(target, online)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    for t, o in zip(target.arrays(), online.arrays()):
        t *= 1.0 - tau
        t += tau * o
    return target
