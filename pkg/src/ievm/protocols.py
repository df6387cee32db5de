"""Open-world evaluation protocols.

Both generators split the class set into known and unknown halves with a
seeded shuffle, build a fixed test set, and emit training batches:

* Protocol 1 (sample-incremental): starts with two known classes, adds one
  new class per epoch until all known classes have appeared, then keeps
  drawing mixed batches of previously seen classes. Batches have constant
  size; every batch mixes the newly introduced class with a uniform draw
  over the unused samples of already-seen classes.
* Protocol 2 (class-incremental): partitions the known classes into groups;
  each group arrives as one batch carrying all of its classes' remaining
  training samples.

The openness of an epoch is ``1 - sqrt(2 * n_train / (n_train + n_test))``
over class counts: training classes seen so far versus classes present in
the test set. Generators are pure functions of (data, parameters, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import LabeledSample
from .errors import DataFormatError, EVMError

#: Fraction of each known class held out for the fixed test set (Protocol 1).
HOLDOUT_FRACTION = 0.2

MANIFEST_FORMAT = "ievm-protocol-stream"


@dataclass
class ProtocolStream:
    """A reproducible open-world stream.

    ``batches`` pairs a 1-based epoch index with that epoch's training
    samples. ``openness_schedule[i]`` is the openness after batch i has
    been absorbed. Index lists reference positions in the source dataset
    and allow exact replay through a manifest.
    """

    batches: list[tuple[int, list[LabeledSample]]]
    test_set: list[LabeledSample]
    known_classes: set[str]
    unknown_classes: set[str]
    openness_schedule: list[float]
    batch_indices: list[list[int]] = field(default_factory=list)
    test_indices: list[int] = field(default_factory=list)

    def is_unknown(self, label: str) -> bool:
        return label not in self.known_classes


def openness(n_train_classes: int, n_test_classes: int) -> float:
    """Openness of a recognition problem from its class counts."""
    if n_train_classes < 1 or n_test_classes < 1:
        raise EVMError("class counts must be positive")
    if n_train_classes > n_test_classes:
        raise EVMError(
            f"training classes ({n_train_classes}) cannot exceed test classes "
            f"({n_test_classes})"
        )
    return 1.0 - math.sqrt(2.0 * n_train_classes / (n_train_classes + n_test_classes))


def _split_classes(
    data: list[LabeledSample], known_fraction: float, rng: np.random.Generator
) -> tuple[list[str], list[str], dict[str, list[int]]]:
    if not (0.0 < known_fraction <= 1.0):
        raise EVMError(f"known_fraction must be in (0, 1], got {known_fraction}")
    by_class: dict[str, list[int]] = {}
    for i, sample in enumerate(data):
        by_class.setdefault(sample.label, []).append(i)
    labels = sorted(by_class)
    n_known = int(round(len(labels) * known_fraction))
    n_known = min(max(n_known, 1), len(labels))
    order = [labels[i] for i in rng.permutation(len(labels))]
    return order[:n_known], order[n_known:], by_class


def protocol1_generate(
    data: list[LabeledSample],
    known_fraction: float,
    batch_size: int,
    n_epochs: int,
    seed: int,
) -> ProtocolStream:
    """Sample-incremental stream with a fixed open test set.

    Epoch 1 introduces two known classes; each later epoch up to
    ``n_known - 1`` introduces exactly one more. The introduced classes
    contribute ``ceil(batch_size / classes_seen)`` samples (capped by
    availability); the rest of the batch is a seeded uniform draw over the
    unused training samples of previously seen classes. From epoch
    ``n_known`` on, batches draw from all known classes. Runs out of
    samples -> error naming the epoch.
    """
    if batch_size < 2:
        raise EVMError(f"batch_size must be at least 2, got {batch_size}")
    if n_epochs < 1:
        raise EVMError(f"n_epochs must be positive, got {n_epochs}")
    rng = np.random.default_rng(seed)
    known, unknown, by_class = _split_classes(data, known_fraction, rng)
    if len(known) < 2:
        raise EVMError(f"protocol 1 needs at least 2 known classes, got {len(known)}")

    test_indices: list[int] = []
    pools: dict[str, list[int]] = {}
    for label in known:
        idx = np.asarray(by_class[label])
        held = max(1, math.ceil(HOLDOUT_FRACTION * idx.size))
        if idx.size - held < 1:
            raise EVMError(
                f"class {label!r} has {idx.size} samples; not enough for a "
                "train/test split"
            )
        chosen = rng.choice(idx.size, size=held, replace=False)
        mask = np.zeros(idx.size, dtype=bool)
        mask[chosen] = True
        test_indices.extend(int(v) for v in idx[mask])
        pool = idx[~mask]
        pools[label] = [int(v) for v in pool[rng.permutation(pool.size)]]
    for label in unknown:
        test_indices.extend(by_class[label])

    n_test_classes = len(known) + len(unknown)
    batches: list[tuple[int, list[LabeledSample]]] = []
    batch_indices: list[list[int]] = []
    schedule: list[float] = []
    for epoch in range(1, n_epochs + 1):
        if epoch == 1:
            fresh = known[:2]
        elif epoch <= len(known) - 1:
            fresh = [known[epoch]]
        else:
            fresh = []
        seen_count = min(epoch + 1, len(known))
        chosen: list[int] = []
        for label in fresh:
            quota = min(len(pools[label]), math.ceil(batch_size / seen_count))
            chosen.extend(pools[label][:quota])
            del pools[label][:quota]
        if epoch == 1:
            backlog_labels = known[:2]
        else:
            backlog_labels = known[: min(epoch, len(known))]
        backlog = [(label, i) for label in backlog_labels for i in range(len(pools[label]))]
        need = batch_size - len(chosen)
        if need < 0:
            need = 0
        if need > len(backlog):
            raise EVMError(
                f"epoch {epoch}: needs {need} filler samples but only "
                f"{len(backlog)} remain unused"
            )
        if need:
            picks = rng.choice(len(backlog), size=need, replace=False)
            for slot in sorted(int(p) for p in picks):
                label, _ = backlog[slot]
                # backlog positions within one class are interchangeable;
                # consume from the front of that class's shuffled pool.
                chosen.append(pools[label].pop(0))
        batch_indices.append(chosen)
        batches.append((epoch, [data[i] for i in chosen]))
        schedule.append(openness(seen_count, n_test_classes))

    return ProtocolStream(
        batches=batches,
        test_set=[data[i] for i in test_indices],
        known_classes=set(known),
        unknown_classes=set(unknown),
        openness_schedule=schedule,
        batch_indices=batch_indices,
        test_indices=test_indices,
    )


def protocol2_generate(
    data: list[LabeledSample],
    known_fraction: float,
    classes_per_batch: int,
    test_samples_per_known: int,
    seed: int,
) -> ProtocolStream:
    """Class-incremental stream: known classes arrive in groups.

    Every known class appears in exactly one batch, carrying all of its
    remaining training samples; the last group may be smaller. Each known
    class holds out ``test_samples_per_known`` test samples (classes with
    no more than that keep exactly 1). The test set adds every unknown
    class sample.
    """
    if classes_per_batch < 1:
        raise EVMError(f"classes_per_batch must be positive, got {classes_per_batch}")
    if test_samples_per_known < 1:
        raise EVMError(
            f"test_samples_per_known must be positive, got {test_samples_per_known}"
        )
    rng = np.random.default_rng(seed)
    known, unknown, by_class = _split_classes(data, known_fraction, rng)
    if classes_per_batch > len(known):
        raise EVMError(
            f"classes_per_batch ({classes_per_batch}) exceeds known classes "
            f"({len(known)})"
        )

    test_indices: list[int] = []
    train: dict[str, list[int]] = {}
    for label in known:
        idx = np.asarray(by_class[label])
        held = test_samples_per_known if idx.size > test_samples_per_known else 1
        chosen = rng.choice(idx.size, size=held, replace=False)
        mask = np.zeros(idx.size, dtype=bool)
        mask[chosen] = True
        test_indices.extend(int(v) for v in idx[mask])
        train[label] = [int(v) for v in idx[~mask]]
    for label in unknown:
        test_indices.extend(by_class[label])

    n_test_classes = len(known) + len(unknown)
    batches: list[tuple[int, list[LabeledSample]]] = []
    batch_indices: list[list[int]] = []
    schedule: list[float] = []
    for start in range(0, len(known), classes_per_batch):
        group = known[start : start + classes_per_batch]
        chosen = [i for label in group for i in train[label]]
        epoch = len(batches) + 1
        batch_indices.append(chosen)
        batches.append((epoch, [data[i] for i in chosen]))
        schedule.append(openness(start + len(group), n_test_classes))

    return ProtocolStream(
        batches=batches,
        test_set=[data[i] for i in test_indices],
        known_classes=set(known),
        unknown_classes=set(unknown),
        openness_schedule=schedule,
        batch_indices=batch_indices,
        test_indices=test_indices,
    )


def stream_manifest(stream: ProtocolStream) -> dict:
    """JSON-ready manifest for exact replay against the same dataset."""
    n_samples = 0
    for indices in stream.batch_indices:
        n_samples = max(n_samples, max(indices, default=-1) + 1)
    n_samples = max(n_samples, max(stream.test_indices, default=-1) + 1)
    return {
        "format": MANIFEST_FORMAT,
        "version": 1,
        "known_classes": sorted(stream.known_classes),
        "unknown_classes": sorted(stream.unknown_classes),
        "openness_schedule": list(stream.openness_schedule),
        "batches": [
            {"epoch": epoch, "indices": list(indices)}
            for (epoch, _), indices in zip(stream.batches, stream.batch_indices)
        ],
        "test_indices": list(stream.test_indices),
        "min_samples": n_samples,
    }


def stream_from_manifest(data: list[LabeledSample], manifest: dict) -> ProtocolStream:
    """Rebuild a stream from a manifest and the original dataset."""
    if manifest.get("format") != MANIFEST_FORMAT:
        raise DataFormatError(f"not a stream manifest: {manifest.get('format')!r}")
    if manifest.get("version") != 1:
        raise DataFormatError(f"unsupported manifest version {manifest.get('version')!r}")
    if len(data) < manifest["min_samples"]:
        raise DataFormatError(
            f"dataset has {len(data)} samples, manifest needs {manifest['min_samples']}"
        )
    batches = [
        (entry["epoch"], [data[i] for i in entry["indices"]])
        for entry in manifest["batches"]
    ]
    return ProtocolStream(
        batches=batches,
        test_set=[data[i] for i in manifest["test_indices"]],
        known_classes=set(manifest["known_classes"]),
        unknown_classes=set(manifest["unknown_classes"]),
        openness_schedule=list(manifest["openness_schedule"]),
        batch_indices=[list(entry["indices"]) for entry in manifest["batches"]],
        test_indices=list(manifest["test_indices"]),
    )
