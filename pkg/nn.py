"""Classical head building blocks: dense layers, RReLU, softmax
cross-entropy and Adam.

All layer functions accept a leading batch axis. Batch losses are means over
the batch, and the returned logit gradients already include the 1/B factor.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


# ============ CONSTANTS ============

RRELU_LOWER = 1.0 / 8.0
RRELU_UPPER = 1.0 / 3.0
RRELU_EVAL_SLOPE = (RRELU_LOWER + RRELU_UPPER) / 2.0

ADAM_LR = 0.01
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8

TRAIN = "train"
EVAL = "eval"

logger = logging.getLogger(__name__)


# ============ EXCEPTIONS ============

class NNError(Exception):
    """Base exception for classical layer errors."""
    pass


# ============ DENSE ============

@dataclass
class DenseLayer:
    """Affine map y = W x + b with W of shape (out, in)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise NNError(f"Inconsistent shapes: W {self.weights.shape}, b {self.bias.shape}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise NNError("Dense layer has non-finite entries")

    @classmethod
    def initialized(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "DenseLayer":
        """Uniform in [-1/√fan_in, 1/√fan_in] for weights and bias."""
        bound = 1.0 / math.sqrt(n_in)
        return cls(
            rng.uniform(-bound, bound, size=(n_out, n_in)),
            rng.uniform(-bound, bound, size=n_out),
        )

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


def dense_forward(layer: DenseLayer, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.n_in:
        raise NNError(f"Dense layer expects {layer.n_in} inputs, got {x.shape[-1]}")
    return x @ layer.weights.T + layer.bias


def dense_backward(layer: DenseLayer, x, dy) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (dW, db, dx); batched inputs sum parameter gradients over the batch."""
    x = np.asarray(x, dtype=np.float64)
    dy = np.asarray(dy, dtype=np.float64)
    if x.shape[-1] != layer.n_in or dy.shape[-1] != layer.n_out or x.shape[:-1] != dy.shape[:-1]:
        raise NNError(f"Shape mismatch: x {x.shape}, dy {dy.shape} for layer {layer.weights.shape}")
    x2 = x.reshape(-1, layer.n_in)
    dy2 = dy.reshape(-1, layer.n_out)
    return dy2.T @ x2, dy2.sum(axis=0), dy @ layer.weights


# ============ RRELU ============

def rrelu_slopes(shape, mode: str, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Negative-side slopes: Uniform[1/8, 1/3] per element in train mode, midpoint in eval."""
    if mode == EVAL:
        return np.full(shape, RRELU_EVAL_SLOPE)
    if mode != TRAIN:
        raise NNError(f"Unknown RReLU mode {mode!r}")
    if rng is None:
        raise NNError("RReLU train mode needs a random generator")
    return rng.uniform(RRELU_LOWER, RRELU_UPPER, size=shape)


def rrelu(x, mode: str = EVAL, rng: Optional[np.random.Generator] = None,
          slopes: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """
    Randomized leaky ReLU.

    Args:
        x: Input activations
        mode: 'train' samples slopes, 'eval' uses the midpoint slope
        rng: Generator for train mode
        slopes: Pre-sampled slopes (overrides mode), for frozen-slope checks

    Returns:
        (output, slopes) - the slopes are reused by rrelu_backward
    """
    x = np.asarray(x, dtype=np.float64)
    if slopes is None:
        slopes = rrelu_slopes(x.shape, mode, rng)
    return np.where(x >= 0, x, slopes * x), slopes


def rrelu_backward(x, slopes: np.ndarray, dy) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, 1.0, slopes) * np.asarray(dy, dtype=np.float64)


# ============ SOFTMAX / CROSS-ENTROPY ============

def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_xent(logits, labels) -> tuple[float, np.ndarray]:
    """
    Mean cross-entropy of softmax(logits) against integer labels.

    Args:
        logits: (K,) with an int label, or (B, K) with B labels

    Returns:
        (loss, dlogits) with dlogits = (softmax - onehot) / B
    """
    z = np.asarray(logits, dtype=np.float64)
    single = z.ndim == 1
    z2 = z[None] if single else z
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.shape[0] != z2.shape[0]:
        raise NNError(f"{z2.shape[0]} logit rows but {y.shape[0]} labels")
    if y.size and (y.min() < 0 or y.max() >= z2.shape[1]):
        raise NNError(f"Labels must be in [0, {z2.shape[1]})")

    shifted = z2 - z2.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=-1))
    rows = np.arange(z2.shape[0])
    losses = log_norm - shifted[rows, y]
    loss = float(np.mean(losses))

    grad = softmax(z2)
    grad[rows, y] -= 1.0
    grad /= z2.shape[0]
    return loss, (grad[0] if single else grad)


# ============ ADAM ============

@dataclass
class AdamState:
    """Moment accumulators keyed like the parameter dict they update."""

    lr: float = ADAM_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], lr: float = ADAM_LR, **kwargs) -> "AdamState":
        return cls(
            lr=lr,
            m={k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()},
            v={k: np.zeros_like(p, dtype=np.float64) for k, p in params.items()},
            **kwargs,
        )


def adam_step(state: AdamState, params: dict[str, np.ndarray],
              grads: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    """One bias-corrected Adam update; advances state.step and returns new params."""
    if set(params) != set(grads):
        raise NNError(f"Parameter/gradient keys differ: {sorted(set(params) ^ set(grads))}")
    for key, p in params.items():
        if key not in state.m:
            state.m[key] = np.zeros_like(p, dtype=np.float64)
            state.v[key] = np.zeros_like(p, dtype=np.float64)
        if np.shape(grads[key]) != np.shape(p) or state.m[key].shape != np.shape(p):
            raise NNError(f"Shape mismatch for {key}: param {np.shape(p)}, grad {np.shape(grads[key])}")

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    updated = {}
    for key, p in params.items():
        g = np.asarray(grads[key], dtype=np.float64)
        state.m[key] = state.beta1 * state.m[key] + (1.0 - state.beta1) * g
        state.v[key] = state.beta2 * state.v[key] + (1.0 - state.beta2) * g * g
        m_hat = state.m[key] / correction1
        v_hat = state.v[key] / correction2
        updated[key] = np.asarray(p, dtype=np.float64) - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return updated
