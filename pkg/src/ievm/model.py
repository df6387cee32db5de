"""Model containers: configuration, extreme vectors, and the fitted model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .core import METRICS, WeibullParams, as_features
from .errors import ConfigError, EVMError


@dataclass(frozen=True)
class EVMConfig:
    """Hyper-parameters shared by fitting, reduction, and prediction.

    tail_size
        Number of nearest other-class distances modelled per extreme vector.
    distance_multiplier
        Factor in (0, 1] applied to tail distances before Weibull fitting
        (margin placement). The raw update-sphere radius is never scaled.
    metric
        "euclidean" or "cosine".
    budget
        Per-class cap on extreme vectors for budgeted reduction; None means
        unlimited.
    rejection_threshold
        Minimum winning inclusion probability for a known-class prediction.
    coverage_threshold
        Coverage level used by the set-cover reduction.
    bisection_tolerance
        Interval width at which the budgeted set-cover bisection stops.
    """

    tail_size: int = 75
    distance_multiplier: float = 0.5
    metric: str = "euclidean"
    budget: int | None = None
    rejection_threshold: float = 0.5
    coverage_threshold: float = 0.5
    bisection_tolerance: float = 0.01

    def __post_init__(self) -> None:
        if not isinstance(self.tail_size, int) or self.tail_size < 1:
            raise ConfigError(f"tail_size must be a positive integer, got {self.tail_size}")
        if not (0.0 < self.distance_multiplier <= 1.0):
            raise ConfigError(
                f"distance_multiplier must be in (0, 1], got {self.distance_multiplier}"
            )
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.budget is not None and (not isinstance(self.budget, int) or self.budget < 1):
            raise ConfigError(f"budget must be a positive integer or None, got {self.budget}")
        if not (0.0 <= self.rejection_threshold <= 1.0):
            raise ConfigError(
                f"rejection_threshold must be in [0, 1], got {self.rejection_threshold}"
            )
        if not (0.0 < self.coverage_threshold < 1.0):
            raise ConfigError(
                f"coverage_threshold must be in (0, 1), got {self.coverage_threshold}"
            )
        if not (0.0 < self.bisection_tolerance < 1.0):
            raise ConfigError(
                f"bisection_tolerance must be in (0, 1), got {self.bisection_tolerance}"
            )


@dataclass(eq=False)
class ExtremeVector:
    """One anchor point with its fitted tail model.

    ``tail`` holds the retained nearest other-class distances in raw units,
    sorted ascending; ``params`` is the Weibull fit of the scaled tail plus
    the raw update-sphere radius.
    """

    anchor: np.ndarray
    label: str
    params: WeibullParams
    tail: np.ndarray

    def __post_init__(self) -> None:
        self.anchor = as_features(self.anchor)
        self.tail = np.asarray(self.tail, dtype=np.float64)
        if self.tail.ndim != 1 or self.tail.size == 0:
            raise EVMError("tail must be a non-empty 1-D array")

    @property
    def update_radius(self) -> float:
        return self.params.max_tail_distance


@dataclass(eq=False)
class EVMModel:
    """Fitted model: per-class extreme vectors plus reduction bookkeeping.

    ``coverage_sums[label]`` is aligned with ``classes[label]``: entry i is
    the sum of EV i's inclusion probabilities evaluated at every current
    same-class candidate anchor (self term included, always exactly 1).
    ``epoch`` counts fitting rounds.
    """

    classes: dict[str, list[ExtremeVector]]
    coverage_sums: dict[str, np.ndarray]
    config: EVMConfig
    epoch: int = 0

    def __post_init__(self) -> None:
        for label, evs in self.classes.items():
            sums = self.coverage_sums.get(label)
            if sums is None or len(sums) != len(evs):
                raise EVMError(f"coverage_sums misaligned for class {label!r}")

    @property
    def class_labels(self) -> list[str]:
        return sorted(self.classes)

    @property
    def dimension(self) -> int:
        for evs in self.classes.values():
            if evs:
                return evs[0].anchor.shape[0]
        raise EVMError("empty model has no dimension")

    @property
    def n_extreme_vectors(self) -> int:
        return sum(len(evs) for evs in self.classes.values())

    def ev_counts(self) -> dict[str, int]:
        return {label: len(evs) for label, evs in self.classes.items()}

    def iter_evs(self) -> Iterator[ExtremeVector]:
        for label in self.classes:
            yield from self.classes[label]


def empty_model(config: EVMConfig | None = None) -> EVMModel:
    return EVMModel(classes={}, coverage_sums={}, config=config or EVMConfig())


__all__ = ["EVMConfig", "ExtremeVector", "EVMModel", "empty_model"]
