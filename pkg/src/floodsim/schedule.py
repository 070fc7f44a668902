"""Growth schedules for the pseudo-OOD amplification factor.

Every family ramps from 0 at the start round to a plateau of 2*a at the
halt round, then stays clamped. A nonzero start round delays the ramp by
rescaling the argument onto [start_round, halt_round], so all phase
variants reach the same plateau.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError

FAMILIES = ("cosine", "linear", "quadratic", "exponential", "logistic")


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class WeightSchedule:
    family: str = "cosine"
    a: float = 200.0  # half the plateau amplification
    halt_round: int = 1000
    start_round: int = 0
    k: float | None = None  # exponential rate; default ln(1000)/halt_round
    alpha_slope: float | None = None  # logistic steepness; default 10/halt_round

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown schedule family {self.family!r}")
        if self.a <= 0:
            raise ConfigurationError("amplification coefficient a must be > 0")
        if self.halt_round < 1:
            raise ConfigurationError("halt_round must be a positive integer")
        if not 0 <= self.start_round < self.halt_round:
            raise ConfigurationError("start_round must satisfy 0 <= start_round < halt_round")
        if self.k is not None and self.k <= 0:
            raise ConfigurationError("exponential rate k must be > 0")
        if self.alpha_slope is not None and self.alpha_slope <= 0:
            raise ConfigurationError("logistic alpha_slope must be > 0")

    def value(self, t: int) -> float:
        if t <= self.start_round:
            return 0.0
        if t >= self.halt_round:
            return 2.0 * self.a
        span = self.halt_round - self.start_round
        u = (t - self.start_round) / span
        if self.family == "cosine":
            return self.a * (1.0 - math.cos(math.pi * u))
        if self.family == "linear":
            return 2.0 * self.a * u
        if self.family == "quadratic":
            return 2.0 * self.a * u * u
        if self.family == "exponential":
            k = self.k if self.k is not None else math.log(1000.0) / self.halt_round
            return 2.0 * self.a * (1.0 - math.exp(-k * u * span)) / (1.0 - math.exp(-k * span))
        # logistic, normalized so the ramp spans exactly [0, 2a]
        al = self.alpha_slope if self.alpha_slope is not None else 10.0 / self.halt_round
        x = u * span
        lo = _sigmoid(-al * span / 2.0)
        hi = _sigmoid(al * span / 2.0)
        return 2.0 * self.a * (_sigmoid(al * (x - span / 2.0)) - lo) / (hi - lo)


@dataclass(frozen=True)
class ConstantSchedule:
    """Fixed amplification; used by baselines and degeneracy checks."""

    level: float = 1.0

    def value(self, t: int) -> float:
        return self.level


def lambda_at(schedule, t: int) -> float:
    """Amplification factor at round t."""
    return schedule.value(t)
