"""Model fitting: batch fitting, incremental fitting, and the update-ratio
measurement.

Each training sample becomes an extreme vector (EV): its anchor plus a
Weibull model of the distances to its ``tail_size`` nearest other-class
samples. Incremental fitting keeps every EV's largest retained tail distance
as an update sphere: an EV is re-estimated only when a new other-class
sample lands strictly inside that sphere (or while its tail is not yet
saturated, in which case every new negative still belongs in the tail).
EVs outside both conditions are left untouched, which is where the
incremental variant saves its Weibull fits.

A batch is incorporated jointly: all insertions for an EV are collected
first and the EV is refit once. Fitting a model incrementally over any
split of a dataset therefore reproduces the batch fit of the whole dataset
exactly, as long as no reduction discards EVs in between.
"""

from __future__ import annotations

import numpy as np

from . import core, reduction
from .core import LabeledSample, WeibullParams
from .errors import EVMError
from .model import EVMConfig, EVMModel, ExtremeVector


def _stack_samples(data: list[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    if not data:
        raise EVMError("expected at least one sample")
    dims = {s.features.shape[0] for s in data}
    if len(dims) != 1:
        raise EVMError(f"inconsistent feature dimensions {sorted(dims)}")
    feats = np.stack([s.features for s in data])
    labels = np.asarray([s.label for s in data])
    return feats, labels


def _fit_tail(tail: np.ndarray, config: EVMConfig) -> WeibullParams:
    shape, scale = core.fit_weibull(tail * config.distance_multiplier)
    return WeibullParams(shape=shape, scale=scale, max_tail_distance=float(tail[-1]))


def fit_anchor(
    sample: LabeledSample, negatives: list[LabeledSample], config: EVMConfig
) -> ExtremeVector:
    """Fit a single extreme vector for ``sample`` against ``negatives``.

    The tail keeps the ``config.tail_size`` smallest distances to the
    negatives, sorted ascending; the Weibull is fit on the tail scaled by
    ``config.distance_multiplier``. Every negative must belong to a
    different class than the sample.
    """
    if not negatives:
        raise EVMError("fit_anchor requires at least one negative sample")
    if any(neg.label == sample.label for neg in negatives):
        raise EVMError("negatives must not share the sample's class")
    neg_feats, _ = _stack_samples(negatives)
    if neg_feats.shape[1] != sample.features.shape[0]:
        raise EVMError(
            f"dimension mismatch: sample has {sample.features.shape[0]}, "
            f"negatives have {neg_feats.shape[1]}"
        )
    dists = core.pairwise_distances(sample.features[None, :], neg_feats, config.metric)[0]
    tail = np.sort(dists)[: config.tail_size]
    return ExtremeVector(
        anchor=sample.features.copy(),
        label=sample.label,
        params=_fit_tail(tail, config),
        tail=tail,
    )


def batch_fit(data: list[LabeledSample], config: EVMConfig | None = None) -> EVMModel:
    """Fit a model from scratch: one extreme vector per training sample.

    Requires at least two distinct classes. Classes appear in first-seen
    order; EVs within a class follow dataset order. Coverage sums are
    initialised over each class's full EV set.
    """
    config = config or EVMConfig()
    feats, labels = _stack_samples(data)
    if len(set(labels.tolist())) < 2:
        raise EVMError("batch_fit requires samples from at least two classes")

    dists = core.pairwise_distances(feats, feats, config.metric)
    classes: dict[str, list[ExtremeVector]] = {}
    for i, sample in enumerate(data):
        negative_mask = labels != labels[i]
        tail = np.sort(dists[i, negative_mask])[: config.tail_size]
        ev = ExtremeVector(
            anchor=feats[i].copy(),
            label=sample.label,
            params=_fit_tail(tail, config),
            tail=tail,
        )
        classes.setdefault(sample.label, []).append(ev)

    sums = {
        label: reduction.coverage_sums(evs, config.metric)
        for label, evs in classes.items()
    }
    return EVMModel(classes=classes, coverage_sums=sums, config=config, epoch=1)


def _flatten(
    model: EVMModel,
) -> tuple[list[ExtremeVector], np.ndarray, np.ndarray, list[tuple[str, int]]]:
    evs = list(model.iter_evs())
    anchors = np.stack([ev.anchor for ev in evs])
    labels = np.asarray([ev.label for ev in evs])
    positions = [
        (label, i)
        for label in model.classes
        for i in range(len(model.classes[label]))
    ]
    return evs, anchors, labels, positions


def update_ratio(model: EVMModel, batch: list[LabeledSample]) -> float:
    """Fraction of existing EVs with a new other-class sample strictly
    inside their update sphere. Pure measurement; the model is untouched.
    """
    if model.n_extreme_vectors == 0:
        raise EVMError("update_ratio requires a fitted model")
    if not batch:
        return 0.0
    feats, labels = _stack_samples(batch)
    evs, anchors, ev_labels, _ = _flatten(model)
    if feats.shape[1] != anchors.shape[1]:
        raise EVMError("batch dimension does not match the model")
    dists = core.pairwise_distances(anchors, feats, model.config.metric)
    radii = np.array([ev.params.max_tail_distance for ev in evs])
    negative = ev_labels[:, None] != labels[None, :]
    inside = (dists < radii[:, None]) & negative
    return float(inside.any(axis=1).sum()) / len(evs)


def _row_probabilities(
    row_evs: list[ExtremeVector], at_anchors: np.ndarray, metric: str
) -> np.ndarray:
    """R[i, j] = inclusion probability of row_evs[i] at at_anchors[j]."""
    anchors = np.stack([ev.anchor for ev in row_evs])
    dists = core.pairwise_distances(at_anchors, anchors, metric)
    shapes = np.array([ev.params.shape for ev in row_evs])
    scales = np.array([ev.params.scale for ev in row_evs])
    return core.inclusion_probabilities(shapes, scales, dists).T


def partial_fit(model: EVMModel, batch: list[LabeledSample]) -> EVMModel:
    """Incorporate a batch of new samples into a fitted model in place.

    Existing EVs receive a single joint refit when the batch puts at least
    one new other-class distance into their tail (strictly inside the
    update sphere, or any negative while the tail is shorter than
    ``tail_size``); all other EVs are not touched at all. Every batch
    sample becomes a new EV fitted against the current anchors of other
    classes plus the other-class part of the batch. Per-class coverage
    sums are extended with the new members' contributions; rows of refit
    EVs are recomputed because their parameters changed. Increments
    ``model.epoch`` and returns the same model object.
    """
    if model.n_extreme_vectors == 0:
        raise EVMError("partial_fit requires a model produced by batch_fit")
    if not batch:
        model.epoch += 1
        return model
    feats, labels = _stack_samples(batch)
    if feats.shape[1] != model.dimension:
        raise EVMError(
            f"batch dimension {feats.shape[1]} does not match model dimension "
            f"{model.dimension}"
        )
    union = set(model.classes) | set(labels.tolist())
    if len(union) < 2:
        raise EVMError("model and batch together must contain at least two classes")

    config = model.config
    evs, anchors, ev_labels, positions = _flatten(model)
    model_batch_d = core.pairwise_distances(anchors, feats, config.metric)
    batch_d = core.pairwise_distances(feats, feats, config.metric)

    # Collect all insertions per existing EV, then refit each affected EV once.
    insertions: dict[int, np.ndarray] = {}
    for e, ev in enumerate(evs):
        negative_mask = labels != ev.label
        if not negative_mask.any():
            continue
        new_d = model_batch_d[e, negative_mask]
        if ev.tail.shape[0] < config.tail_size:
            incoming = new_d
        else:
            incoming = new_d[new_d < ev.params.max_tail_distance]
        if incoming.size:
            insertions[e] = incoming

    # New EVs, fitted before any existing EV is modified. Anchor negatives
    # come straight out of the precomputed distance blocks.
    new_evs: list[ExtremeVector] = []
    for j, sample in enumerate(batch):
        from_model = model_batch_d[ev_labels != sample.label, j]
        from_batch = batch_d[j, labels != sample.label]
        tail = np.sort(np.concatenate([from_model, from_batch]))[: config.tail_size]
        new_evs.append(
            ExtremeVector(
                anchor=feats[j].copy(),
                label=sample.label,
                params=_fit_tail(tail, config),
                tail=tail,
            )
        )

    refit_ids: dict[str, set[int]] = {}
    for e, incoming in insertions.items():
        ev = evs[e]
        merged = np.sort(np.concatenate([ev.tail, incoming]))[: config.tail_size]
        ev.tail = merged
        ev.params = _fit_tail(merged, config)
        label, position = positions[e]
        refit_ids.setdefault(label, set()).add(position)

    # Append new EVs in batch order, then bring each class's coverage sums
    # back in line with its candidate list.
    fresh_by_class: dict[str, list[ExtremeVector]] = {}
    for ev in new_evs:
        fresh_by_class.setdefault(ev.label, []).append(ev)

    for label in sorted(set(fresh_by_class) | set(refit_ids)):
        old_members = model.classes.setdefault(label, [])
        old_sums = model.coverage_sums.get(label, np.zeros(0))
        fresh = fresh_by_class.get(label, [])
        combined = old_members + fresh
        combined_anchors = np.stack([ev.anchor for ev in combined])

        sums = np.empty(len(combined))
        sums[: len(old_members)] = old_sums
        if fresh and old_members:
            fresh_anchors = np.stack([ev.anchor for ev in fresh])
            gain = _row_probabilities(old_members, fresh_anchors, config.metric)
            sums[: len(old_members)] += gain.sum(axis=1)
        stale = sorted(refit_ids.get(label, ()))
        stale_rows = [combined[i] for i in stale] + fresh
        if stale_rows:
            rows = _row_probabilities(stale_rows, combined_anchors, config.metric)
            for k, i in enumerate(stale):
                sums[i] = rows[k].sum()
            sums[len(old_members) :] = rows[len(stale) :].sum(axis=1)

        model.classes[label] = combined
        model.coverage_sums[label] = sums

    model.epoch += 1
    return model
