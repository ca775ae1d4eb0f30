"""Entry-point request rates: diurnal baseline, lognormal jitter and client-side surges."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPIKE_FACTOR = 5.0
SPIKE_DURATION = 60.0
STEP_FACTOR = 2.0
JITTER_SIGMA = 0.05

CLIENT_KINDS = ("user_surge_spike", "user_surge_step")


@dataclass(frozen=True)
class WorkloadProfile:
    base_rate: float
    diurnal_amplitude: float = 0.0
    diurnal_period: float = 3600.0
    jitter_sigma: float = JITTER_SIGMA

    def __post_init__(self):
        if self.base_rate < 0:
            raise ValueError("base_rate must be >= 0")
        if not 0.0 <= self.diurnal_amplitude < 1.0:
            raise ValueError("diurnal_amplitude must lie in [0, 1)")
        if self.diurnal_period <= 0:
            raise ValueError("diurnal_period must be > 0")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")


@dataclass(frozen=True)
class ClientAnomalyShape:
    kind: str
    factor: float
    start: float
    duration: float

    def __post_init__(self):
        if self.kind not in CLIENT_KINDS:
            raise ValueError(f"not a client-side anomaly kind: {self.kind!r}")
        if self.factor <= 1:
            raise ValueError("surge factor must be > 1")
        if self.duration <= 0:
            raise ValueError("surge duration must be > 0")

    def active(self, t: float, window: float = 0.0) -> bool:
        end = self.start + self.duration
        if window <= 0:
            return self.start <= t < end
        return self.start < t + window and t < end


def rate_at(
    profile: WorkloadProfile,
    shapes: list[ClientAnomalyShape],
    t: float,
    rng: np.random.Generator | None = None,
    window: float = 0.0,
) -> float:
    """Request rate at time `t`.

    With `window` > 0 a shape counts as active when it intersects ``[t, t + window)``.
    Pass ``rng=None`` to disable jitter.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    rate = profile.base_rate * (1.0 + profile.diurnal_amplitude * math.sin(2.0 * math.pi * t / profile.diurnal_period))
    if rng is not None and profile.jitter_sigma > 0:
        rate *= math.exp(profile.jitter_sigma * rng.standard_normal())
    for shape in shapes:
        if shape.active(t, window):
            rate *= shape.factor
    return max(rate, 0.0)


def rate_series(
    profile: WorkloadProfile,
    shapes: list[ClientAnomalyShape],
    n_windows: int,
    granularity: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-window entry rates; window i covers ``[i*g, (i+1)*g)``."""
    return np.array([rate_at(profile, shapes, i * granularity, rng, granularity) for i in range(n_windows)])
