"""Server loop: client sampling, aggregation, learning-rate decay, evaluation.

Aggregation weights blend normalized data volume with normalized client
confidence; with blend ratio 0 this reduces exactly to FedAvg's
volume-proportional weights. FedAvgM applies server-side momentum on the
aggregated delta instead.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .client import ClientConfig, ClientUpdate, local_update
from .data import Dataset, IndexPartition
from .errors import ConfigurationError, InputError
from .model import Batch, ModelParams, cross_entropy_from_logits, forward, init_params, mlp_shapes
from .schedule import lambda_at

AGGREGATIONS = ("flood", "data_volume", "fedavgm")

# Keeps every cohort member's confidence component strictly positive after
# the min-shift, so raising any client's phi always raises its weight.
PHI_FLOOR = 1e-9


@dataclass
class ServerConfig:
    num_clients: int = 20
    clients_per_round: int = 5
    rounds: int = 100
    alpha: float = 0.5  # confidence blend ratio in aggregation weights
    aggregation: str = "flood"
    server_momentum: float = 0.1  # rho, fedavgm only
    lr_decay: float = 0.998
    eval_every: int = 1
    final_window: int = 10
    hidden_units: int = 64

    def __post_init__(self):
        if not 1 <= self.clients_per_round <= self.num_clients:
            raise ConfigurationError("need 1 <= clients_per_round <= num_clients")
        if self.rounds < 1:
            raise ConfigurationError("rounds must be >= 1")
        if self.alpha < 0:
            raise ConfigurationError("alpha must be non-negative")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigurationError(f"unknown aggregation {self.aggregation!r}")
        if not 0.0 <= self.server_momentum < 1.0:
            raise ConfigurationError("server_momentum must lie in [0, 1)")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ConfigurationError("lr_decay must lie in (0, 1]")
        if self.eval_every < 1 or self.final_window < 1:
            raise ConfigurationError("eval_every and final_window must be positive")


@dataclass
class AggregationWeights:
    weights: np.ndarray  # one per selected client, non-negative, sums to 1


@dataclass
class MetricsRecord:
    round: int
    test_accuracy: float
    test_loss: float
    mean_phi: float
    mean_lambda: float
    update_norm: float
    wall_ms: int


@dataclass
class ExperimentResult:
    records: list[MetricsRecord]
    update_norms: np.ndarray  # per round, ||theta_{t+1} - theta_t|| / lr_t
    params: ModelParams


def select_clients(num_clients: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample of m distinct client ids, returned sorted."""
    if m > num_clients:
        raise ConfigurationError(f"cannot select {m} of {num_clients} clients")
    return np.sort(rng.choice(num_clients, size=m, replace=False))


def compute_agg_weights(updates: list[ClientUpdate], alpha: float) -> AggregationWeights:
    """Blend normalized sample counts with min-shifted normalized confidences."""
    if not updates:
        raise InputError("cannot aggregate an empty cohort")
    ns = np.array([u.n for u in updates], dtype=float)
    phis = np.array([u.phi for u in updates], dtype=float)
    if not np.all(np.isfinite(phis)):
        raise InputError("client confidence values must be finite")
    norm_n = ns / ns.sum()
    if alpha == 0.0:
        return AggregationWeights(norm_n)
    shifted = phis - phis.min()
    if shifted.sum() == 0.0:  # all confidences equal
        shifted = np.ones_like(shifted)
    else:
        shifted = shifted + PHI_FLOOR
    raw = norm_n + alpha * shifted / shifted.sum()
    return AggregationWeights(raw / raw.sum())


def aggregate(updates: list[ClientUpdate], weights: AggregationWeights) -> ModelParams:
    """Convex combination of client parameter vectors."""
    if len(updates) != len(weights.weights):
        raise InputError("weight count does not match update count")
    length = updates[0].params.values.size
    if any(u.params.values.size != length for u in updates):
        raise InputError("client parameter vectors have mismatched lengths")
    values = np.zeros(length)
    for w, u in zip(weights.weights, updates):
        values += w * u.params.values
    return ModelParams(list(updates[0].params.layer_shapes), values)


def server_momentum_step(
    global_params: ModelParams,
    aggregated: ModelParams,
    velocity: np.ndarray,
    rho: float,
) -> tuple[ModelParams, np.ndarray]:
    """FedAvgM: smooth the global update with momentum on the round delta."""
    if global_params.values.shape != aggregated.values.shape:
        raise InputError("aggregated parameter length does not match global")
    delta = global_params.values - aggregated.values
    # global - new_velocity == aggregated - rho*velocity; the second form is
    # exact (not just close) when rho == 0.
    new_values = aggregated.values - rho * velocity
    return (
        ModelParams(list(global_params.layer_shapes), new_values),
        rho * velocity + delta,
    )


def evaluate(params: ModelParams, test_set: Dataset) -> tuple[float, float]:
    """(accuracy, mean loss); argmax ties resolve to the lowest class index."""
    if len(test_set) == 0:
        raise InputError("empty test set")
    logits = forward(params, Batch(test_set.features, test_set.labels))
    accuracy = float((logits.argmax(axis=1) == test_set.labels).mean())
    loss = float(cross_entropy_from_logits(logits, test_set.labels).mean())
    return accuracy, loss


def run_experiment(
    server_cfg: ServerConfig,
    client_cfg: ClientConfig,
    partition: IndexPartition,
    dataset: Dataset,
    test_set: Dataset,
    seed: int,
) -> ExperimentResult:
    """Full round loop, deterministic in (configs, partition, dataset, seed).

    Per-client RNG streams are keyed by (seed, round, client id), so the
    trajectory of one cell never depends on what other cells run.
    """
    if partition.num_clients != server_cfg.num_clients:
        raise ConfigurationError(
            f"partition has {partition.num_clients} clients, config says {server_cfg.num_clients}"
        )
    client_data = [dataset.subset(idx) for idx in partition.client_indices]
    dim = dataset.features.shape[1]
    init_rng = np.random.default_rng([seed, 0])
    global_params = init_params(
        mlp_shapes(dim, dataset.num_classes, server_cfg.hidden_units), init_rng
    )
    velocity = np.zeros_like(global_params.values)
    records: list[MetricsRecord] = []
    update_norms = np.zeros(server_cfg.rounds)
    for t in range(server_cfg.rounds):
        t_start = time.perf_counter()
        lr_t = client_cfg.lr * server_cfg.lr_decay**t
        round_cfg = replace(client_cfg, lr=lr_t)
        select_rng = np.random.default_rng([seed, 1, t])
        selected = select_clients(server_cfg.num_clients, server_cfg.clients_per_round, select_rng)
        updates = [
            local_update(
                global_params,
                t,
                client_data[c],
                round_cfg,
                np.random.default_rng([seed, 2, t, int(c)]),
            )
            for c in selected
        ]
        if server_cfg.aggregation == "flood":
            weights = compute_agg_weights(updates, server_cfg.alpha)
        else:
            weights = compute_agg_weights(updates, 0.0)
        aggregated = aggregate(updates, weights)
        if server_cfg.aggregation == "fedavgm":
            new_global, velocity = server_momentum_step(
                global_params, aggregated, velocity, server_cfg.server_momentum
            )
        else:
            new_global = aggregated
        update_norms[t] = float(
            np.linalg.norm(new_global.values - global_params.values) / lr_t
        )
        global_params = new_global
        if t % server_cfg.eval_every == 0 or t == server_cfg.rounds - 1:
            accuracy, loss = evaluate(global_params, test_set)
            mean_lambda = (
                lambda_at(client_cfg.schedule, t) if client_cfg.method == "flood" else 1.0
            )
            records.append(
                MetricsRecord(
                    round=t,
                    test_accuracy=accuracy,
                    test_loss=loss,
                    mean_phi=float(np.mean([u.phi for u in updates])),
                    mean_lambda=mean_lambda,
                    update_norm=update_norms[t],
                    wall_ms=int((time.perf_counter() - t_start) * 1000),
                )
            )
    return ExperimentResult(records, update_norms, global_params)
