"""Minimal differentiable numerical core.

Dense layers, activations, temporal pooling, weighted cross-entropy on raw
scores, Adam, fan-in scaled initialization, and a finite-difference gradient
checker. Everything is float64 and deterministic given identical inputs and
seeds; layers hold no hidden state, so callers keep the forward activations
they need for the backward pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ShapeError(ValueError):
    """Dimension mismatch carrying the expected and actual sizes."""

    def __init__(self, what: str, expected, actual):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what}: expected {expected}, got {actual}")


class NonFiniteError(ArithmeticError):
    """A value that must be finite is NaN or infinite."""


def as_vector(x, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(name, "1-D array", f"{arr.ndim}-D array")
    return arr


# ---------------------------------------------------------------------------
# Dense layer
# ---------------------------------------------------------------------------

@dataclass
class DenseLayer:
    """Affine map y = weight @ x + bias with weight shape (d_out, d_in)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ShapeError("dense weight", "2-D matrix", f"{self.weight.ndim}-D array")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError("dense bias", (self.weight.shape[0],), self.bias.shape)

    @property
    def d_in(self) -> int:
        return self.weight.shape[1]

    @property
    def d_out(self) -> int:
        return self.weight.shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.d_in,):
            raise ShapeError("dense input", (self.d_in,), x.shape)
        return self.weight @ x + self.bias

    def backward(self, x: np.ndarray, dout: np.ndarray, grads: LayerGrads) -> np.ndarray:
        """Accumulate parameter gradients for input `x` and return dL/dx."""
        if dout.shape != (self.d_out,):
            raise ShapeError("dense output gradient", (self.d_out,), dout.shape)
        grads.weight += np.outer(dout, x)
        grads.bias += dout
        return self.weight.T @ dout

    def copy(self) -> DenseLayer:
        return DenseLayer(self.weight.copy(), self.bias.copy())


@dataclass
class LayerGrads:
    """Gradient accumulators shaped like a DenseLayer's parameters."""

    weight: np.ndarray
    bias: np.ndarray

    @classmethod
    def zeros_like(cls, layer: DenseLayer) -> LayerGrads:
        return cls(np.zeros_like(layer.weight), np.zeros_like(layer.bias))

    def scale(self, factor: float) -> None:
        self.weight *= factor
        self.bias *= factor


def init_dense(d_out: int, d_in: int, rng: np.random.Generator) -> DenseLayer:
    """Fan-in scaled uniform init (variance 1/d_in), zero bias."""
    return DenseLayer(lecun_init(d_out, d_in, rng), np.zeros(d_out))


def lecun_init(d_out: int, d_in: int, rng: np.random.Generator) -> np.ndarray:
    """Weights drawn uniformly in [-sqrt(3/d_in), +sqrt(3/d_in)]."""
    if d_out <= 0 or d_in <= 0:
        raise ShapeError("init dims", "positive (d_out, d_in)", (d_out, d_in))
    limit = math.sqrt(3.0 / d_in)
    return rng.uniform(-limit, limit, size=(d_out, d_in))


# ---------------------------------------------------------------------------
# Activations and pooling
# ---------------------------------------------------------------------------

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, dout: np.ndarray) -> np.ndarray:
    """Gradient passes only where the pre-activation was strictly positive."""
    return np.where(x > 0.0, dout, 0.0)


def softmax(scores: np.ndarray) -> np.ndarray:
    """Stable softmax via max subtraction."""
    shifted = scores - np.max(scores)
    e = np.exp(shifted)
    return e / np.sum(e)


def log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    return shifted - math.log(np.sum(np.exp(shifted)))


def temporal_max_pool(frames: list[np.ndarray]) -> np.ndarray:
    """Elementwise maximum over a non-empty list of equal-length vectors."""
    if len(frames) == 0:
        raise ShapeError("temporal_max_pool frames", ">= 1 frame", 0)
    stack = np.stack(frames)
    return stack.max(axis=0)


def temporal_max_pool_backward(frames: list[np.ndarray], dout: np.ndarray) -> list[np.ndarray]:
    """Route each coordinate's gradient to its argmax frame (ties: lowest index)."""
    stack = np.stack(frames)
    winners = stack.argmax(axis=0)  # np.argmax takes the first (lowest-index) maximum
    grads = [np.zeros_like(f) for f in frames]
    for j, i in enumerate(winners):
        grads[i][j] = dout[j]
    return grads


def temporal_avg_pool(frames: list[np.ndarray]) -> np.ndarray:
    """Elementwise mean over a non-empty list of equal-length vectors."""
    if len(frames) == 0:
        raise ShapeError("temporal_avg_pool frames", ">= 1 frame", 0)
    stack = np.stack(frames)
    return stack.sum(axis=0) / len(frames)


def temporal_avg_pool_backward(frames: list[np.ndarray], dout: np.ndarray) -> list[np.ndarray]:
    share = dout / len(frames)
    return [share.copy() for _ in frames]


# ---------------------------------------------------------------------------
# Weighted cross-entropy on raw scores
# ---------------------------------------------------------------------------

def weighted_cross_entropy(scores: np.ndarray, label: int, weights: np.ndarray | None = None) -> float:
    """-w[label] * log softmax(scores)[label], fused on raw scores.

    Computed via log-sum-exp so a near-zero probability never hits log(0).
    `weights=None` means unit weights.
    """
    n = scores.shape[0]
    if not 0 <= label < n:
        raise ShapeError("cross-entropy label", f"class id in [0, {n})", label)
    w = 1.0 if weights is None else float(weights[label])
    return -w * log_softmax(scores)[label]


def weighted_cross_entropy_grad(scores: np.ndarray, label: int, weights: np.ndarray | None = None) -> np.ndarray:
    """Gradient w.r.t. the raw scores: w[label] * (softmax(scores) - onehot(label))."""
    w = 1.0 if weights is None else float(weights[label])
    grad = softmax(scores) * w
    grad[label] -= w
    return grad


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Per-parameter first/second moment accumulators plus hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One in-place Adam update with bias correction over named parameter blocks."""
    if state.lr <= 0:
        raise ValueError(f"learning rate must be positive, got {state.lr}")
    state.step_count += 1
    t = state.step_count
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient '{name}'", p.shape, g.shape)
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# Finite-difference gradient checking
# ---------------------------------------------------------------------------

@dataclass
class GradCheckReport:
    """Per-block and overall max relative error between analytic and FD gradients."""

    per_block: dict[str, float]
    n_probes: dict[str, int]

    @property
    def max_rel_error(self) -> float:
        return max(self.per_block.values()) if self.per_block else 0.0


def grad_check(
    loss_fn,
    params: dict[str, np.ndarray],
    n_probes: int = 50,
    eps: float = 1e-5,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare analytic gradients with central finite differences.

    `loss_fn(params) -> (loss, grads)` must be a pure scalar function of the
    parameter dict, returning gradients keyed like `params`. For each block,
    up to `n_probes` distinct coordinates are probed (all of them when the
    block is smaller). The relative error per coordinate is
    |g_a - g_fd| / max(|g_a|, |g_fd|, 1e-8).
    """
    if rng is None:
        rng = np.random.default_rng(0)
    loss, analytic = loss_fn(params)
    if not np.isfinite(loss):
        raise NonFiniteError(f"loss is not finite: {loss}")

    per_block: dict[str, float] = {}
    probes: dict[str, int] = {}
    for name, p in params.items():
        flat = p.reshape(-1)
        n = min(n_probes, flat.size)
        idx = rng.choice(flat.size, size=n, replace=False)
        g_flat = analytic[name].reshape(-1)
        worst = 0.0
        for i in idx:
            saved = flat[i]
            flat[i] = saved + eps
            loss_plus, _ = loss_fn(params)
            flat[i] = saved - eps
            loss_minus, _ = loss_fn(params)
            flat[i] = saved
            if not (np.isfinite(loss_plus) and np.isfinite(loss_minus)):
                raise NonFiniteError("perturbed loss is not finite")
            g_fd = (loss_plus - loss_minus) / (2.0 * eps)
            g_a = g_flat[i]
            rel = abs(g_a - g_fd) / max(abs(g_a), abs(g_fd), 1e-8)
            worst = max(worst, rel)
        per_block[name] = worst
        probes[name] = n
    return GradCheckReport(per_block=per_block, n_probes=probes)
