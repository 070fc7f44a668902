"""Client-side local training.

One call trains a copy of the global model on the client's data and
returns the updated parameters, the sample count, and the client's mean
confidence score under the trained model. The flood method reweights each
mini-batch by confidence; fedavg and fedprox train with uniform weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ConfigurationError, InputError
from .model import (
    Batch,
    ModelParams,
    OptimizerState,
    _backward,
    _forward_cached,
    sgd_step,
)
from .schedule import ConstantSchedule, WeightSchedule, lambda_at
from .scoring import Scorer, aggregate_confidence, compute_mask, percentile_threshold, score_batch

METHODS = ("flood", "fedavg", "fedprox")


@dataclass
class ClientConfig:
    method: str = "flood"
    local_epochs: int = 2
    batch_size: int = 32
    q: float = 0.7  # fraction of each batch treated as pseudo-OOD
    schedule: WeightSchedule | ConstantSchedule = field(default_factory=WeightSchedule)
    scorer: Scorer = field(default_factory=Scorer)
    prox_mu: float = 0.1
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown client method {self.method!r}")
        if self.local_epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("local_epochs and batch_size must be positive")
        if not 0.0 < self.q < 1.0:
            raise ConfigurationError(f"q must lie in (0, 1), got {self.q}")
        if self.prox_mu < 0:
            raise ConfigurationError("prox_mu must be non-negative")


@dataclass
class ClientUpdate:
    params: ModelParams
    n: int
    phi: float


def proximal_grad(params: ModelParams, anchor: ModelParams, mu: float) -> np.ndarray:
    """Gradient of (mu/2) * ||params - anchor||^2."""
    if params.values.shape != anchor.values.shape:
        raise InputError("proximal anchor length does not match parameter length")
    return mu * (params.values - anchor.values)


def local_update(
    global_params: ModelParams,
    round_t: int,
    data: Dataset,
    cfg: ClientConfig,
    rng: np.random.Generator,
) -> ClientUpdate:
    """Run the local epochs and return (trained params, n, mean confidence)."""
    n = len(data)
    if n == 0:
        raise InputError("client dataset is empty")
    theta = global_params.copy()
    state = OptimizerState(
        momentum_buffer=np.zeros_like(theta.values),
        lr=cfg.lr,
        momentum=cfg.momentum,
        weight_decay=cfg.weight_decay,
    )
    lam = lambda_at(cfg.schedule, round_t)
    for _ in range(cfg.local_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            take = order[start : start + cfg.batch_size]
            batch = Batch(data.features[take], data.labels[take])
            logits, acts = _forward_cached(theta, batch.features)
            if cfg.method == "flood":
                # Scores reuse the training forward pass; no extra inference.
                scores = score_batch(cfg.scorer, logits)
                tau = percentile_threshold(scores, cfg.q)
                mask = compute_mask(scores, tau, lam)
            else:
                mask = np.ones(len(take))
            grad = _backward(theta, acts, batch.labels, mask)
            if cfg.method == "fedprox" and cfg.prox_mu != 0.0:
                grad = grad + proximal_grad(theta, global_params, cfg.prox_mu)
            theta, state = sgd_step(theta, grad, state)
    phi = aggregate_confidence(theta, data, cfg.scorer)
    return ClientUpdate(theta, n, phi)
