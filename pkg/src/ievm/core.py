"""Numeric core: distances, Weibull tail fitting, inclusion probabilities.

Model elements ("extreme vectors") carry a Weibull distribution over the
distances to their nearest other-class neighbours. The inclusion probability
of a point at distance ``d`` is ``exp(-(d / scale) ** shape)``: 1 at the
anchor itself, decaying towards 0 with distance. All heavy arithmetic is
dispatched to the active kernel backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backends, counters
from .errors import EVMError

#: Reserved rejection label; never a valid class identifier.
UNKNOWN_LABEL = "unknown"

#: Distances below this are clamped before Weibull fitting.
MIN_TAIL_DISTANCE = 1e-12

#: Clamp interval for the fitted Weibull shape.
SHAPE_FLOOR = 1e-3
SHAPE_CAP = 1e4

_METRIC_CODES = {"euclidean": 0, "cosine": 1}
METRICS = tuple(_METRIC_CODES)


def metric_code(metric: str) -> int:
    try:
        return _METRIC_CODES[metric]
    except KeyError:
        raise EVMError(f"unknown metric {metric!r}; choose one of {METRICS}") from None


def as_features(values) -> np.ndarray:
    """Validate and convert one feature vector to a 1-D float64 array."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise EVMError(f"feature vector must be 1-D and non-empty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise EVMError("feature vector contains non-finite values")
    return arr


@dataclass(eq=False)
class LabeledSample:
    """One feature vector with its class label (an opaque non-empty string)."""

    features: np.ndarray
    label: str

    def __post_init__(self) -> None:
        self.features = as_features(self.features)
        if not isinstance(self.label, str) or not self.label:
            raise EVMError("sample label must be a non-empty string")
        if self.label == UNKNOWN_LABEL:
            raise EVMError(f"label {UNKNOWN_LABEL!r} is reserved for rejection output")


@dataclass(frozen=True)
class WeibullParams:
    """Fitted tail model of one extreme vector.

    ``max_tail_distance`` is the largest retained tail distance in raw
    (unscaled) units; it is the radius of the update sphere used by the
    incremental fitting rule, not a Weibull parameter.
    """

    shape: float
    scale: float
    max_tail_distance: float

    def __post_init__(self) -> None:
        if not (self.shape > 0.0 and np.isfinite(self.shape)):
            raise EVMError(f"shape must be positive and finite, got {self.shape}")
        if not (self.scale > 0.0 and np.isfinite(self.scale)):
            raise EVMError(f"scale must be positive and finite, got {self.scale}")
        if not (self.max_tail_distance >= 0.0 and np.isfinite(self.max_tail_distance)):
            raise EVMError("max_tail_distance must be non-negative and finite")


def _as_matrix(points, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise EVMError(f"{name} must be a (n, dim) array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise EVMError(f"{name} contains non-finite values")
    return arr


def pairwise_distances(a, b, metric: str = "euclidean") -> np.ndarray:
    """Distance matrix between the rows of ``a`` and the rows of ``b``.

    Parameters
    ----------
    a, b : array-like, shape (n, dim) and (m, dim)
    metric : {"euclidean", "cosine"}
        "cosine" is the cosine distance ``1 - cos(a, b)`` and rejects
        zero-norm rows.

    Returns
    -------
    ndarray, shape (n, m), non-negative.
    """
    code = metric_code(metric)
    mat_a = _as_matrix(a, "a")
    mat_b = _as_matrix(b, "b")
    if mat_a.shape[1] != mat_b.shape[1]:
        raise EVMError(
            f"dimension mismatch: {mat_a.shape[1]} vs {mat_b.shape[1]}"
        )
    if code == _METRIC_CODES["cosine"]:
        if ((mat_a * mat_a).sum(axis=1) == 0.0).any() or (
            (mat_b * mat_b).sum(axis=1) == 0.0
        ).any():
            raise EVMError("cosine distance is undefined for zero-norm vectors")
    counters.add("distance_evals", mat_a.shape[0] * mat_b.shape[0])
    return backends.get().pairwise_distances(mat_a, mat_b, code)


def distance(a, b, metric: str = "euclidean") -> float:
    """Distance between two single feature vectors."""
    return float(pairwise_distances(as_features(a), as_features(b), metric)[0, 0])


def inclusion_probabilities(shapes, scales, dists) -> np.ndarray:
    """Bulk inclusion probabilities.

    ``dists`` has one column per model element; ``shapes``/``scales`` carry
    that element's Weibull parameters. Returns an array of the same shape as
    ``dists`` with values in [0, 1].
    """
    shp = np.ascontiguousarray(shapes, dtype=np.float64)
    scl = np.ascontiguousarray(scales, dtype=np.float64)
    mat = np.ascontiguousarray(dists, dtype=np.float64)
    if mat.ndim != 2 or shp.shape != scl.shape or shp.ndim != 1:
        raise EVMError("inclusion_probabilities expects (n, m) distances and (m,) params")
    if mat.shape[1] != shp.shape[0]:
        raise EVMError(
            f"distance columns ({mat.shape[1]}) must match parameter count ({shp.shape[0]})"
        )
    return backends.get().inclusion_matrix(shp, scl, mat)


def inclusion_probability(params: WeibullParams, d: float) -> float:
    """Inclusion probability of a point at distance ``d`` from the anchor.

    Exactly 1.0 at distance 0; monotone non-increasing in ``d``. Evaluated
    through the same kernel as the bulk path so scalar and matrix uses agree
    bit for bit.
    """
    if d < 0 or not np.isfinite(d):
        raise EVMError(f"distance must be non-negative and finite, got {d}")
    out = inclusion_probabilities(
        np.array([params.shape]), np.array([params.scale]), np.array([[float(d)]])
    )
    return float(out[0, 0])


def fit_weibull(
    tail,
    *,
    shape_cap: float = SHAPE_CAP,
    max_iterations: int = 100,
    tolerance: float = 1e-9,
) -> tuple[float, float]:
    """Maximum-likelihood Weibull fit of a distance tail.

    Newton iteration on the shape with the scale eliminated in closed form;
    the starting point is the method-of-moments estimate on the log scale.
    At most ``max_iterations`` steps, stopping when the shape update falls
    below ``tolerance``; the shape is clamped to [1e-3, ``shape_cap``].

    Distances below 1e-12 are clamped to 1e-12 first. An all-equal tail (a
    degenerate spike) returns ``(shape_cap, common_value)``. Negative or
    non-finite entries and empty tails are errors.

    Returns
    -------
    (shape, scale) : tuple of float
    """
    arr = np.ascontiguousarray(tail, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EVMError("cannot fit a Weibull to an empty tail")
    if not np.isfinite(arr).all():
        raise EVMError("tail contains non-finite values")
    if (arr < 0).any():
        raise EVMError("tail contains negative distances")
    arr = np.maximum(arr, MIN_TAIL_DISTANCE)
    counters.add("weibull_refits")
    lo = float(arr.min())
    hi = float(arr.max())
    if lo == hi:
        return float(shape_cap), hi
    shape, scale = backends.get().weibull_mle(
        arr, max_iterations, tolerance, SHAPE_FLOOR, shape_cap
    )
    return float(shape), float(scale)
