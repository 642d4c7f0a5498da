"""Duration distributions used for task compute times and cold starts.

Only two shapes are supported: a degenerate constant and a log-normal.
Both return milliseconds. Sampling takes an explicit ``numpy`` generator so
simulation runs stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Constant:
    """A fixed duration in milliseconds."""

    ms: float

    def __post_init__(self) -> None:
        if self.ms < 0:
            raise ValueError(f"duration must be >= 0 ms, got {self.ms}")

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.ms)

    @property
    def mean_ms(self) -> float:
        return float(self.ms)


@dataclass(frozen=True)
class LogNormal:
    """Log-normal duration over milliseconds, parameterized on the log scale."""

    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    def sample(self, rng: np.random.Generator) -> float:
        return float(rng.lognormal(self.mu, self.sigma))

    @property
    def mean_ms(self) -> float:
        return float(np.exp(self.mu + self.sigma**2 / 2.0))


Duration = Union[Constant, LogNormal]


def duration_from_config(value) -> Duration:
    """Build a Duration from config data: a bare number or ``{lognormal = [mu, sigma]}``."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Constant(float(value))
    if isinstance(value, dict) and set(value) == {"lognormal"}:
        params = value["lognormal"]
        if not (isinstance(params, (list, tuple)) and len(params) == 2):
            raise ValueError(f"lognormal expects [mu, sigma], got {params!r}")
        return LogNormal(float(params[0]), float(params[1]))
    raise ValueError(f"cannot interpret duration {value!r}")
