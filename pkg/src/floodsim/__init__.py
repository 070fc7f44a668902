"""Deterministic federated-learning simulator with confidence-driven dual weighting."""

from .client import ClientConfig, ClientUpdate, local_update, proximal_grad
from .config import ExperimentConfig, parse_config, serialize_config
from .data import (
    Dataset,
    IndexPartition,
    SyntheticSpec,
    gen_synthetic,
    load_csv,
    partition_dirichlet,
    partition_pathological,
    save_csv,
)
from .errors import ConfigurationError, InputError, ParseError
from .model import (
    Batch,
    ModelParams,
    OptimizerState,
    forward,
    init_params,
    mlp_shapes,
    per_sample_loss,
    sgd_step,
    weighted_grad,
)
from .schedule import ConstantSchedule, WeightSchedule, lambda_at
from .scoring import (
    Scorer,
    aggregate_confidence,
    compute_mask,
    percentile_threshold,
    score_batch,
)
from .server import (
    AggregationWeights,
    ExperimentResult,
    MetricsRecord,
    ServerConfig,
    aggregate,
    compute_agg_weights,
    evaluate,
    run_experiment,
    select_clients,
    server_momentum_step,
)

__all__ = [name for name in dir() if not name.startswith("_")]
