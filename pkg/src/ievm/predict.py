"""Open-set prediction: per-class maximum inclusion probability with a
rejection threshold."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import core
from .core import UNKNOWN_LABEL
from .errors import EVMError
from .model import EVMModel


@dataclass(frozen=True)
class Prediction:
    """Outcome of one query.

    ``label`` is the winning class, or ``"unknown"`` when the winning
    score falls below the rejection threshold (and for empty models).
    ``score`` is the winning per-class maximum inclusion probability.
    """

    label: str
    score: float
    per_class_scores: dict[str, float] = field(default_factory=dict)


def score_matrix(model: EVMModel, queries) -> tuple[np.ndarray, list[str]]:
    """Per-class maximum inclusion probabilities for many queries.

    Returns ``(scores, class_labels)`` where ``scores[q, c]`` is the
    maximum inclusion probability of query q over all EVs of class
    ``class_labels[c]``; classes are listed in sorted label order.
    """
    class_labels = model.class_labels
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim == 1:
        queries = queries[None, :]
    if not class_labels:
        return np.zeros((queries.shape[0], 0)), []
    if queries.ndim != 2 or queries.shape[1] != model.dimension:
        raise EVMError(
            f"queries must have shape (n, {model.dimension}), got {queries.shape}"
        )

    evs = [ev for label in class_labels for ev in model.classes[label]]
    anchors = np.stack([ev.anchor for ev in evs])
    shapes = np.array([ev.params.shape for ev in evs])
    scales = np.array([ev.params.scale for ev in evs])
    dists = core.pairwise_distances(queries, anchors, model.config.metric)
    probs = core.inclusion_probabilities(shapes, scales, dists)

    scores = np.empty((queries.shape[0], len(class_labels)))
    start = 0
    for c, label in enumerate(class_labels):
        stop = start + len(model.classes[label])
        scores[:, c] = probs[:, start:stop].max(axis=1)
        start = stop
    return scores, class_labels


def predict(model: EVMModel, x, threshold: float | None = None) -> Prediction:
    """Classify one query, rejecting as ``"unknown"`` below the threshold.

    The winning class is the argmax of the per-class maximum inclusion
    probabilities (ties go to the lowest label). ``threshold`` defaults to
    ``model.config.rejection_threshold``; the query is accepted when the
    winning score is at least the threshold. An empty model yields
    ``("unknown", 0.0)``.
    """
    if threshold is None:
        threshold = model.config.rejection_threshold
    if not model.classes:
        return Prediction(UNKNOWN_LABEL, 0.0, {})
    features = core.as_features(x)
    scores, class_labels = score_matrix(model, features[None, :])
    row = scores[0]
    winner = int(np.argmax(row))  # class labels are sorted, so ties pick the lowest
    score = float(row[winner])
    per_class = {label: float(row[c]) for c, label in enumerate(class_labels)}
    label = class_labels[winner] if score >= threshold else UNKNOWN_LABEL
    return Prediction(label, score, per_class)
