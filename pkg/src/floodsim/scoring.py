"""Post-hoc confidence scoring on logits, percentile thresholding, and masks.

Scores are oriented so that higher means more in-distribution. Samples
scoring below the batch's q-th percentile are treated as pseudo-OOD and
receive the scheduled amplification weight; everything else gets weight 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError
from .model import Batch, ModelParams, forward, softmax

SCORER_KINDS = ("msp", "max_logit", "energy")


@dataclass(frozen=True)
class Scorer:
    """Confidence scorer operating on logits only.

    kind: "msp" (max softmax probability), "max_logit", or "energy"
    (temperature-scaled log-sum-exp). Feature-space scorers would slot in
    here as new kinds.
    """

    kind: str = "energy"
    temperature: float = 1.0

    def __post_init__(self):
        if self.kind not in SCORER_KINDS:
            raise ConfigurationError(f"unknown scorer kind {self.kind!r}")
        if self.temperature <= 0:
            raise ConfigurationError("scorer temperature must be > 0")


def score_batch(scorer: Scorer, logits: np.ndarray) -> np.ndarray:
    """Per-row confidence score; higher = more in-distribution."""
    logits = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(logits)):
        raise InputError("logits must be finite")
    if scorer.kind == "msp":
        return softmax(logits).max(axis=1)
    if scorer.kind == "max_logit":
        return logits.max(axis=1)
    # energy: T * logsumexp(logits / T), computed stably
    t = scorer.temperature
    scaled = logits / t
    m = scaled.max(axis=1)
    return t * (m + np.log(np.exp(scaled - m[:, None]).sum(axis=1)))


def percentile_threshold(scores: np.ndarray, q: float) -> float:
    """Nearest-rank q-th percentile: the ceil(q*n)-th smallest score."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise InputError("cannot take a percentile of an empty score vector")
    if not 0.0 < q < 1.0:
        raise ConfigurationError(f"percentile q must lie in (0, 1), got {q}")
    idx = math.ceil(q * scores.size) - 1
    return float(np.sort(scores)[idx])


def compute_mask(scores: np.ndarray, tau: float, lam: float) -> np.ndarray:
    """Weight lam for scores below tau, 1 otherwise (ties count as in-distribution)."""
    if lam < 0:
        raise InputError("mask amplification weight must be non-negative")
    scores = np.asarray(scores, dtype=float)
    return np.where(scores < tau, float(lam), 1.0)


def aggregate_confidence(params: ModelParams, dataset, scorer: Scorer) -> float:
    """Mean confidence score over a full dataset under fixed parameters."""
    if len(dataset.labels) == 0:
        raise InputError("cannot aggregate confidence over an empty dataset")
    logits = forward(params, Batch(dataset.features, dataset.labels))
    return float(score_batch(scorer, logits).mean())
