"""Lognormal activity-duration model.

An activity duration is either Lognormal(mu, sigma) in log space or a
frozen constant (dummy activities with baseline 0 stay exactly 0 and
never consume randomness). Priors are built mean-preserving from a
deterministic baseline d: mu = ln d - sigma^2/2, so the expected duration
equals d exactly and a deterministic pass over prior means reproduces the
baseline schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NonPositiveBaseline
from .rng import RngStream

# Lower bound on sigma: densities stay well-defined while sigma -> 0
# approximates a deterministic activity.
SIGMA_MIN = 1e-6

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class LognormalParams:
    mu: float
    sigma: float


@dataclass(frozen=True)
class FrozenDuration:
    """A duration that is a known constant (zero for dummy activities)."""

    value: float


DurationModel = Union[LognormalParams, FrozenDuration]


def is_frozen(model: DurationModel) -> bool:
    return isinstance(model, FrozenDuration)


def expected_duration(model: DurationModel) -> float:
    """Mean duration: exp(mu + sigma^2/2), or the frozen constant."""
    if isinstance(model, FrozenDuration):
        return model.value
    return math.exp(model.mu + 0.5 * model.sigma * model.sigma)


def from_baseline(d: float, sigma: float) -> DurationModel:
    """Mean-preserving prior for baseline duration d.

    d = 0 yields a frozen-zero duration (ln 0 is undefined and dummy
    activities must stay exact); d < 0 is rejected.
    """
    if d < 0 or not math.isfinite(d):
        raise NonPositiveBaseline(f"baseline duration must be >= 0, got {d}")
    if d == 0:
        return FrozenDuration(0.0)
    sigma = max(float(sigma), SIGMA_MIN)
    return LognormalParams(mu=math.log(d) - 0.5 * sigma * sigma, sigma=sigma)


def priors_from_baselines(baselines, sigma: float) -> list[DurationModel]:
    """Per-activity mean-preserving priors for a baseline duration vector."""
    return [from_baseline(float(d), sigma) for d in baselines]


def log_pdf(p: LognormalParams, x: float) -> float:
    """Lognormal log-density; -inf for x <= 0 (support constraint)."""
    if x <= 0:
        return -math.inf
    z = (math.log(x) - p.mu) / p.sigma
    return -math.log(x) - math.log(p.sigma) - _LOG_SQRT_2PI - 0.5 * z * z


def log_pdf_array(p: LognormalParams, x: np.ndarray) -> np.ndarray:
    """Vectorized log_pdf over strictly positive x."""
    log_x = np.log(x)
    z = (log_x - p.mu) / p.sigma
    return -log_x - math.log(p.sigma) - _LOG_SQRT_2PI - 0.5 * z * z


def sample(model: DurationModel, stream: RngStream) -> float:
    """One duration draw; frozen activities return their constant and do
    not consume the stream."""
    if isinstance(model, FrozenDuration):
        return model.value
    return math.exp(model.mu + model.sigma * stream.normal())


def sample_block(model: DurationModel, stream: RngStream, count: int) -> np.ndarray:
    """count draws from one activity's distribution."""
    if isinstance(model, FrozenDuration):
        return np.full(count, model.value)
    return np.exp(model.mu + model.sigma * stream.normal_block(count))
