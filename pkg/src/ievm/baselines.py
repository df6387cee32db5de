"""Nearest-neighbour baselines: open-set NN (distance ratio) and
thresholded NN. Both use exact linear scans over the stored samples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import UNKNOWN_LABEL, LabeledSample
from .errors import EVMError
from .predict import Prediction


@dataclass
class NNStore:
    """Growing pool of labelled samples for the NN baselines."""

    metric: str = "euclidean"
    samples: list[LabeledSample] = field(default_factory=list)

    def __post_init__(self) -> None:
        core.metric_code(self.metric)

    @property
    def labels(self) -> list[str]:
        return sorted({s.label for s in self.samples})


def nn_partial_fit(store: NNStore, batch: list[LabeledSample]) -> NNStore:
    """Append a batch to the store (all NN 'training' there is)."""
    for sample in batch:
        if store.samples and sample.features.shape != store.samples[0].features.shape:
            raise EVMError("batch dimension does not match the store")
    store.samples.extend(batch)
    return store


def _scan(store: NNStore, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if not store.samples:
        raise EVMError("nearest-neighbour store is empty")
    feats = np.stack([s.features for s in store.samples])
    labels = np.asarray([s.label for s in store.samples])
    dists = core.pairwise_distances(x[None, :], feats, store.metric)[0]
    return dists, labels


def osnn_predict(store: NNStore, x, ratio_threshold: float) -> Prediction:
    """Open-set NN: accept the nearest class only if the distance ratio
    between the nearest sample and the nearest sample of any other class
    is at most ``ratio_threshold``.

    The ratio d1/d2 lies in [0, 1] (d2 >= d1 by construction); a query
    coinciding with a stored sample has ratio 0. The prediction score is
    1 - ratio, so higher means more confidently known.
    """
    if not (0.0 < ratio_threshold <= 1.0):
        raise EVMError(f"ratio_threshold must be in (0, 1], got {ratio_threshold}")
    dists, labels = _scan(store, core.as_features(x))
    if len(set(labels.tolist())) < 2:
        raise EVMError("open-set NN needs stored samples from at least two classes")
    nearest = int(np.argmin(dists))
    d1 = float(dists[nearest])
    winner = labels[nearest]
    other = dists[labels != winner]
    d2 = float(other.min())
    ratio = 0.0 if d1 == 0.0 else d1 / d2
    label = str(winner) if ratio <= ratio_threshold else UNKNOWN_LABEL
    return Prediction(label, 1.0 - ratio, {str(winner): 1.0 - ratio})


def tnn_predict(store: NNStore, x, distance_threshold: float) -> Prediction:
    """Thresholded 1-NN: accept the nearest class when the nearest
    distance is at most ``distance_threshold``; otherwise unknown.

    The prediction score is 1 / (1 + d1), a monotone mapping of the
    nearest distance into (0, 1].
    """
    if not (distance_threshold >= 0.0):
        raise EVMError(f"distance_threshold must be non-negative, got {distance_threshold}")
    dists, labels = _scan(store, core.as_features(x))
    nearest = int(np.argmin(dists))
    d1 = float(dists[nearest])
    winner = str(labels[nearest])
    label = winner if d1 <= distance_threshold else UNKNOWN_LABEL
    return Prediction(label, 1.0 / (1.0 + d1), {winner: 1.0 / (1.0 + d1)})
