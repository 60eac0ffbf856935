"""Tanh MLPs stored as flat float64 vectors, with exact reverse-mode gradients.

Layer ``l`` occupies a contiguous slice of the flat vector: its weight matrix
``(out, in)`` in row-major order followed by its bias. Hidden layers use tanh;
the output layer is linear (logits for the actor, a scalar for the critic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .airsim import N_ACTIONS
from .env import OBS_DIM


class NonFiniteError(FloatingPointError):
    def __init__(self, where: str):
        super().__init__(f"non-finite value in {where}")
        self.where = where


@dataclass(frozen=True)
class Params:
    """Flat parameter vector plus the layer sizes that give it shape."""
    flat: np.ndarray
    sizes: tuple[int, ...]

    def __post_init__(self):
        if self.flat.shape != (param_count(self.sizes),):
            raise ValueError(f"vector of length {self.flat.shape} does not fit sizes {self.sizes}")

    def with_flat(self, flat: np.ndarray) -> "Params":
        return type(self)(np.asarray(flat, dtype=np.float64), self.sizes)

    def layers(self):
        return unpack(self.flat, self.sizes)


class PolicyParams(Params):
    pass


class CriticParams(Params):
    pass


def param_count(sizes) -> int:
    return sum(o * i + o for i, o in zip(sizes[:-1], sizes[1:]))


def unpack(flat: np.ndarray, sizes) -> list[tuple[np.ndarray, np.ndarray]]:
    out, k = [], 0
    for i, o in zip(sizes[:-1], sizes[1:]):
        W = flat[k:k + o * i].reshape(o, i)
        k += o * i
        b = flat[k:k + o]
        k += o
        out.append((W, b))
    return out


def _orthogonal(rng: np.random.Generator, rows: int, cols: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_params(sizes, rng: np.random.Generator, final_scale: float = 1.0) -> np.ndarray:
    sizes = tuple(sizes)
    flat = np.zeros(param_count(sizes))
    k = 0
    n_layers = len(sizes) - 1
    for l, (i, o) in enumerate(zip(sizes[:-1], sizes[1:])):
        gain = final_scale if l == n_layers - 1 else math.sqrt(2.0)
        flat[k:k + o * i] = _orthogonal(rng, o, i, gain).ravel()
        k += o * i + o
    return flat


def init_policy(rng: np.random.Generator, hidden=(64, 64), final_scale: float = 0.01) -> PolicyParams:
    sizes = (OBS_DIM, *hidden, N_ACTIONS)
    return PolicyParams(init_params(sizes, rng, final_scale), sizes)


def init_critic(rng: np.random.Generator, state_dim: int, hidden=(128, 128)) -> CriticParams:
    sizes = (state_dim, *hidden, 1)
    return CriticParams(init_params(sizes, rng, 1.0), sizes)


def mlp_forward(flat: np.ndarray, sizes, X: np.ndarray):
    """Return the output and the activations needed for the backward pass."""
    acts = [X]
    h = X
    layers = unpack(flat, sizes)
    for l, (W, b) in enumerate(layers):
        z = h @ W.T + b
        h = np.tanh(z) if l < len(layers) - 1 else z
        acts.append(h)
    return h, acts


def mlp_backward(flat: np.ndarray, sizes, acts, dout: np.ndarray) -> np.ndarray:
    """Gradient of ``sum(dout * output)`` with respect to the flat vector."""
    layers = unpack(flat, sizes)
    grads = []
    g = dout
    for l in range(len(layers) - 1, -1, -1):
        W, _ = layers[l]
        if l < len(layers) - 1:
            g = g * (1.0 - acts[l + 1] ** 2)
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"backward pass at layer {l}")
        gW = g.T @ acts[l]
        gb = g.sum(axis=0)
        grads.append((gW, gb))
        if l > 0:
            g = g @ W
    parts = []
    for gW, gb in reversed(grads):
        parts.append(gW.ravel())
        parts.append(gb)
    return np.concatenate(parts)


def _check_input(name: str, arr: np.ndarray, width: int) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape[-1] != width:
        raise ValueError(f"{name} has width {arr.shape[-1]}, expected {width}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def policy_logits(params: PolicyParams, obs: np.ndarray):
    obs = _check_input("observation", obs, params.sizes[0])
    if not np.all(np.isfinite(params.flat)):
        raise ValueError("policy parameters contain NaN or Inf")
    return mlp_forward(params.flat, params.sizes, np.atleast_2d(obs))


def policy_forward(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    """Action probabilities; one row per observation (1-D in, 1-D out)."""
    logits, _ = policy_logits(params, obs)
    p = np.exp(log_softmax(logits))
    return p[0] if np.ndim(obs) == 1 else p


def value_forward(params: CriticParams, state: np.ndarray):
    state = _check_input("global state", state, params.sizes[0])
    out, _ = mlp_forward(params.flat, params.sizes, np.atleast_2d(state))
    return float(out[0, 0]) if np.ndim(state) == 1 else out[:, 0]


def entropy_from_logits(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row entropy and its gradient with respect to the logits."""
    logp = log_softmax(logits)
    p = np.exp(logp)
    H = -(p * logp).sum(axis=-1)
    dH = -p * (logp + H[:, None])
    return H, dH


def policy_entropy(params: PolicyParams, obs: np.ndarray) -> float:
    """Entropy of the action distribution, averaged over rows for a batch."""
    logits, _ = policy_logits(params, obs)
    H, _ = entropy_from_logits(logits)
    return float(H.mean())


def entropy_value_and_grad(params: PolicyParams, obs_batch: np.ndarray) -> tuple[float, np.ndarray]:
    logits, acts = policy_logits(params, obs_batch)
    H, dH = entropy_from_logits(logits)
    B = logits.shape[0]
    return float(H.mean()), mlp_backward(params.flat, params.sizes, acts, dH / B)


LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def gradient(loss: LossFn, params) -> np.ndarray:
    """Evaluate ``loss`` (flat vector -> (value, reverse-mode gradient)) and
    return the gradient after checking it is finite."""
    flat = params.flat if isinstance(params, Params) else np.asarray(params, dtype=np.float64)
    value, grad = loss(flat)
    if not math.isfinite(value):
        raise NonFiniteError("loss value")
    if grad.shape != flat.shape:
        raise ValueError("gradient shape does not match parameters")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("gradient")
    return grad


def finite_difference(f: Callable[[np.ndarray], float], flat: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient; the independent check for ``gradient``."""
    g = np.zeros_like(flat)
    x = flat.copy()
    for i in range(len(flat)):
        orig = x[i]
        x[i] = orig + h
        fp = f(x)
        x[i] = orig - h
        fm = f(x)
        x[i] = orig
        g[i] = (fp - fm) / (2 * h)
    return g


def entropy_ascent_direction(params: PolicyParams, obs_batch: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Batch-mean entropy gradient divided by (its 2-norm + eps)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    obs_batch = np.atleast_2d(obs_batch)
    if obs_batch.shape[0] == 0:
        raise ValueError("observation batch is empty")
    _, g = entropy_value_and_grad(params, obs_batch)
    return g / (np.linalg.norm(g) + eps)


class Adam:
    def __init__(self, n: int, lr: float = 3e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.t = 0

    def step(self, flat: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return flat - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state(self) -> dict:
        return {"m": self.m.copy(), "v": self.v.copy(), "t": self.t}


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(grad))
    if max_norm > 0 and norm > max_norm:
        grad = grad * (max_norm / (norm + 1e-12))
    return grad, norm
