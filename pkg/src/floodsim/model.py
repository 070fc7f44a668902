"""Small MLP classifier with flat parameter storage and hand-derived gradients.

Parameters live in a single flat vector so federated averaging is plain
vector arithmetic. Layout per layer: weight matrix (row-major), then bias.
Hidden layers use tanh; the output layer is linear and feeds a softmax
cross-entropy loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, InputError


@dataclass
class ModelParams:
    """Flat parameter vector plus the layer shapes needed to interpret it."""

    layer_shapes: list[tuple[int, int]]
    values: np.ndarray

    def copy(self) -> "ModelParams":
        return ModelParams(list(self.layer_shapes), self.values.copy())


@dataclass
class Batch:
    features: np.ndarray  # (B, d)
    labels: np.ndarray  # (B,) ints in [0, K)


@dataclass
class OptimizerState:
    """SGD with momentum and weight decay; lr decay is applied by the server."""

    momentum_buffer: np.ndarray
    lr: float
    momentum: float = 0.9
    weight_decay: float = 0.0
    lr_decay: float = 0.998


def num_values(layer_shapes: list[tuple[int, int]]) -> int:
    return sum(fi * fo + fo for fi, fo in layer_shapes)


def mlp_shapes(dim: int, num_classes: int, hidden: int = 64) -> list[tuple[int, int]]:
    """Reference architecture: dim -> hidden (tanh) -> num_classes."""
    return [(dim, hidden), (hidden, num_classes)]


def init_params(layer_shapes: list[tuple[int, int]], rng: np.random.Generator) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    chunks = []
    for fi, fo in layer_shapes:
        bound = math.sqrt(6.0 / (fi + fo))
        chunks.append(rng.uniform(-bound, bound, fi * fo))
        chunks.append(np.zeros(fo))
    return ModelParams(list(layer_shapes), np.concatenate(chunks))


def _layers(params: ModelParams) -> list[tuple[np.ndarray, np.ndarray]]:
    if params.values.shape != (num_values(params.layer_shapes),):
        raise ConfigurationError(
            f"parameter vector has length {params.values.size}, "
            f"expected {num_values(params.layer_shapes)}"
        )
    out = []
    off = 0
    for fi, fo in params.layer_shapes:
        w = params.values[off : off + fi * fo].reshape(fi, fo)
        off += fi * fo
        b = params.values[off : off + fo]
        off += fo
        out.append((w, b))
    return out


def _forward_cached(params: ModelParams, features: np.ndarray):
    """Forward pass keeping per-layer activations for backprop.

    Returns (logits, activations) where activations[0] is the input and
    activations[i] is the post-tanh output of hidden layer i.
    """
    layers = _layers(params)
    if features.ndim != 2 or features.shape[1] != layers[0][0].shape[0]:
        raise ConfigurationError(
            f"feature matrix shape {features.shape} does not match "
            f"first layer fan_in {layers[0][0].shape[0]}"
        )
    acts = [features]
    h = features
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        h = z if i == len(layers) - 1 else np.tanh(z)
        acts.append(h)
    return h, acts


def forward(params: ModelParams, batch: Batch) -> np.ndarray:
    """Logits (B x K) for a batch."""
    logits, _ = _forward_cached(params, batch.features)
    return logits


def _check_labels(labels: np.ndarray, num_classes: int) -> None:
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise InputError(
            f"labels must lie in [0, {num_classes}); got range "
            f"[{labels.min()}, {labels.max()}]"
        )


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy_from_logits(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-row -log softmax probability of the true class, via stable log-sum-exp."""
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return lse - logits[np.arange(len(labels)), labels]


def per_sample_loss(params: ModelParams, batch: Batch) -> np.ndarray:
    _check_labels(batch.labels, params.layer_shapes[-1][1])
    return cross_entropy_from_logits(forward(params, batch), batch.labels)


def _backward(params, acts, labels, weights) -> np.ndarray:
    """Gradient of (1/B) * sum_i weights_i * CE_i, as a flat vector."""
    layers = _layers(params)
    batch_size = len(labels)
    d = softmax(acts[-1])
    d[np.arange(batch_size), labels] -= 1.0
    d *= (weights / batch_size)[:, None]
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)
    for i in reversed(range(len(layers))):
        w, _ = layers[i]
        grads[i] = (acts[i].T @ d, d.sum(axis=0))
        if i > 0:
            d = (d @ w.T) * (1.0 - acts[i] ** 2)  # tanh'
    return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])


def weighted_grad(params: ModelParams, batch: Batch, weights: np.ndarray) -> np.ndarray:
    """Gradient of the weighted mean loss (1/B) * sum_i w_i * loss_i."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != batch.labels.shape:
        raise InputError(
            f"weights length {weights.size} does not match batch size {batch.labels.size}"
        )
    if weights.size and weights.min() < 0:
        raise InputError("sample weights must be non-negative")
    _check_labels(batch.labels, params.layer_shapes[-1][1])
    _, acts = _forward_cached(params, batch.features)
    return _backward(params, acts, batch.labels, weights)


def sgd_step(
    params: ModelParams, gradient: np.ndarray, state: OptimizerState
) -> tuple[ModelParams, OptimizerState]:
    """One SGD step with momentum and decoupled-from-schedule weight decay."""
    if gradient.shape != params.values.shape:
        raise InputError("gradient length does not match parameter length")
    if state.momentum_buffer.shape != params.values.shape:
        raise InputError("momentum buffer length does not match parameter length")
    g = gradient
    if state.weight_decay != 0.0:
        g = g + state.weight_decay * params.values
    buffer = state.momentum * state.momentum_buffer + g
    new_values = params.values - state.lr * buffer
    return (
        ModelParams(list(params.layer_shapes), new_values),
        replace(state, momentum_buffer=buffer),
    )
