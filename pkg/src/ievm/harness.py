"""Experiment harness: synthetic data, configuration, the epoch loop, and
report emission.

A run is fully determined by its configuration (seeds included). Efficiency
evidence is the operation-counter bundle; wall-clock seconds are collected
on the report object but left out of emitted files so identical runs
produce identical bytes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, counters, fitting, io, metrics, protocols, reduction
from .backends import active_backend
from .predict import score_matrix
from .core import UNKNOWN_LABEL, LabeledSample
from .errors import ConfigError, EVMError
from .model import EVMConfig, EVMModel
from .reduction import ClusterParams

METHODS = ("evm", "ievm", "c-evm", "c-ievm", "osnn", "tnn")
REDUCTIONS = ("none", "set-cover", "set-cover-budget", "wksc")
_EVM_METHODS = ("evm", "ievm", "c-evm", "c-ievm")
_CLUSTERED = ("c-evm", "c-ievm")


def synth_blobs(
    n_classes: int, per_class: int, dimension: int, spread: float, seed: int
) -> list[LabeledSample]:
    """Seeded isotropic Gaussian blobs, one per class.

    Class means are drawn at random and rescaled so every pair is at least
    ``6 * spread`` apart; samples add ``spread``-scaled Gaussian noise.
    Labels are ``class_0 .. class_{n-1}``.
    """
    if min(n_classes, per_class, dimension) < 1:
        raise EVMError("n_classes, per_class, and dimension must be positive")
    if not (spread > 0 and np.isfinite(spread)):
        raise EVMError(f"spread must be positive and finite, got {spread}")
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(n_classes, dimension))
    if n_classes >= 2:
        diff = means[:, None, :] - means[None, :, :]
        gaps = np.sqrt((diff * diff).sum(axis=2))
        gaps[np.diag_indices(n_classes)] = np.inf
        closest = float(gaps.min())
        if closest == 0.0:
            raise EVMError("degenerate mean placement")
        if closest < 6.0 * spread:
            means *= 6.0 * spread / closest
    samples = []
    for c in range(n_classes):
        feats = means[c] + spread * rng.normal(size=(per_class, dimension))
        samples.extend(LabeledSample(feats[i], f"class_{c}") for i in range(per_class))
    return samples


_KEY_DEFAULTS: dict[str, object] = {
    "method": None,  # required
    "reduction": "none",
    "budget": None,
    "coverage_threshold": 0.5,
    "bisection_tolerance": 0.01,
    "tail_size": 75,
    "distance_multiplier": 0.5,
    "metric": "euclidean",
    "rejection_threshold": 0.5,
    "cluster_epsilon": None,
    "cluster_min_points": 3,
    "protocol": None,  # required
    "data": None,  # required
    "synth_classes": 5,
    "synth_per_class": 50,
    "synth_dim": 4,
    "synth_spread": 1.0,
    "data_seed": None,
    "known_fraction": 0.5,
    "batch_size": 20,
    "n_epochs": None,
    "classes_per_batch": None,
    "test_samples_per_known": 1,
    "seed": None,  # required
    "far_targets": (0.1,),
    "averaging": "micro",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated flat experiment configuration. Build from a parsed config
    document with :meth:`from_mapping`; unknown keys are errors."""

    method: str
    protocol: int
    data: str
    seed: int
    reduction: str = "none"
    budget: int | None = None
    coverage_threshold: float = 0.5
    bisection_tolerance: float = 0.01
    tail_size: int = 75
    distance_multiplier: float = 0.5
    metric: str = "euclidean"
    rejection_threshold: float = 0.5
    cluster_epsilon: float | None = None
    cluster_min_points: int = 3
    synth_classes: int = 5
    synth_per_class: int = 50
    synth_dim: int = 4
    synth_spread: float = 1.0
    data_seed: int | None = None
    known_fraction: float = 0.5
    batch_size: int = 20
    n_epochs: int | None = None
    classes_per_batch: int | None = None
    test_samples_per_known: int = 1
    far_targets: tuple[float, ...] = (0.1,)
    averaging: str = "micro"

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.reduction not in REDUCTIONS:
            raise ConfigError(
                f"reduction must be one of {REDUCTIONS}, got {self.reduction!r}"
            )
        if self.method in ("osnn", "tnn") and self.reduction != "none":
            raise ConfigError(f"method {self.method!r} does not support reduction")
        if self.reduction in ("wksc", "set-cover-budget") and not self.budget:
            raise ConfigError(f"reduction {self.reduction!r} requires a budget")
        if self.method in _CLUSTERED and self.cluster_epsilon is None:
            raise ConfigError(f"method {self.method!r} requires cluster_epsilon")
        if self.protocol not in (1, 2):
            raise ConfigError(f"protocol must be 1 or 2, got {self.protocol!r}")
        if self.protocol == 1 and self.n_epochs is None:
            raise ConfigError("protocol 1 requires n_epochs")
        if self.protocol == 2 and self.classes_per_batch is None:
            raise ConfigError("protocol 2 requires classes_per_batch")
        if (
            self.protocol == 2
            and self.method in _EVM_METHODS
            and self.classes_per_batch is not None
            and self.classes_per_batch < 2
        ):
            # the first fit needs other-class samples to form tails
            raise ConfigError(
                f"method {self.method!r} on protocol 2 needs classes_per_batch >= 2"
            )
        if not isinstance(self.seed, int):
            raise ConfigError(f"seed must be an integer, got {self.seed!r}")
        if not self.far_targets:
            raise ConfigError("far_targets must be non-empty")
        if self.averaging not in ("micro", "macro"):
            raise ConfigError(f"averaging must be micro or macro, got {self.averaging!r}")

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        unknown = sorted(set(mapping) - set(_KEY_DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        missing = [k for k in ("method", "protocol", "data", "seed") if k not in mapping]
        if missing:
            raise ConfigError(f"missing required configuration keys: {missing}")
        values = dict(mapping)
        if "far_targets" in values:
            targets = values["far_targets"]
            if isinstance(targets, str):
                targets = [part for part in targets.split(",") if part.strip()]
            try:
                values["far_targets"] = tuple(float(t) for t in targets)
            except (TypeError, ValueError):
                raise ConfigError(f"bad far_targets {values['far_targets']!r}") from None
        return cls(**values)

    def evm_config(self) -> EVMConfig:
        return EVMConfig(
            tail_size=self.tail_size,
            distance_multiplier=self.distance_multiplier,
            metric=self.metric,
            budget=self.budget,
            rejection_threshold=self.rejection_threshold,
            coverage_threshold=self.coverage_threshold,
            bisection_tolerance=self.bisection_tolerance,
        )

    def as_dict(self) -> dict:
        out = {}
        for key in _KEY_DEFAULTS:
            value = getattr(self, key)
            out[key] = list(value) if isinstance(value, tuple) else value
        return out


@dataclass
class EpochStats:
    epoch: int
    samples_seen: int
    openness: float
    update_ratio: float | None
    ev_counts: dict[str, int]
    dir_at_far: list[dict[str, float]]
    counters: dict[str, int]


@dataclass
class EpochTimings:
    epoch: int
    fit_seconds: float
    reduce_seconds: float
    eval_seconds: float


@dataclass
class RunReport:
    config: dict
    backend: str
    epochs: list[EpochStats]
    timings: list[EpochTimings] = field(default_factory=list)


def _build_stream(config: ExperimentConfig, samples: list[LabeledSample]):
    if config.protocol == 1:
        return protocols.protocol1_generate(
            samples,
            config.known_fraction,
            config.batch_size,
            config.n_epochs,
            config.seed,
        )
    return protocols.protocol2_generate(
        samples,
        config.known_fraction,
        config.classes_per_batch,
        config.test_samples_per_known,
        config.seed,
    )


def _load_data(config: ExperimentConfig) -> list[LabeledSample]:
    if config.data == "synth":
        data_seed = config.seed if config.data_seed is None else config.data_seed
        return synth_blobs(
            config.synth_classes,
            config.synth_per_class,
            config.synth_dim,
            config.synth_spread,
            data_seed,
        )
    return io.load_features(config.data)


def _cluster_batch(
    batch: list[LabeledSample], params: ClusterParams, metric: str
) -> list[LabeledSample]:
    by_label: dict[str, list[LabeledSample]] = {}
    for sample in batch:
        by_label.setdefault(sample.label, []).append(sample)
    out: list[LabeledSample] = []
    for label in by_label:
        out.extend(reduction.dbscan_centroids(by_label[label], params, metric))
    return out


def _reduce_model(model: EVMModel, config: ExperimentConfig) -> None:
    for label in model.class_labels:
        evs = model.classes[label]
        if config.reduction == "wksc":
            kept, cache = reduction.reduce_wksc(
                evs, model.coverage_sums[label], config.budget, config.metric
            )
        else:
            if config.reduction == "set-cover":
                kept = reduction.reduce_set_cover(
                    evs, config.coverage_threshold, config.metric
                )
            else:
                kept = reduction.reduce_set_cover_budget(
                    evs, config.budget, config.bisection_tolerance, config.metric
                )
            cache = reduction.coverage_sums(kept, config.metric)
        model.classes[label] = kept
        model.coverage_sums[label] = cache
        if config.reduction in ("wksc", "set-cover-budget"):
            assert len(kept) <= config.budget, "budget exceeded after reduction"


def _evaluate(
    config: ExperimentConfig,
    model: EVMModel | None,
    store: baselines.NNStore | None,
    test_set: list[LabeledSample],
    seen: set[str],
) -> list[metrics.EvalRecord]:
    records = []
    if model is not None:
        queries = np.stack([s.features for s in test_set])
        scores, labels = score_matrix(model, queries)
        winners = scores.argmax(axis=1)
        for i, sample in enumerate(test_set):
            truth = sample.label if sample.label in seen else UNKNOWN_LABEL
            records.append(
                metrics.EvalRecord(
                    true_label=truth,
                    predicted_label=labels[int(winners[i])],
                    score=float(scores[i, int(winners[i])]),
                )
            )
    else:
        # distance ratios need a second class; until one arrives every
        # open-set NN query is an abstention
        osnn_ready = config.method != "osnn" or len(store.labels) >= 2
        for sample in test_set:
            truth = sample.label if sample.label in seen else UNKNOWN_LABEL
            if not osnn_ready:
                records.append(
                    metrics.EvalRecord(
                        true_label=truth, predicted_label=UNKNOWN_LABEL, score=0.0
                    )
                )
                continue
            if config.method == "osnn":
                pred = baselines.osnn_predict(store, sample.features, 1.0)
            else:
                pred = baselines.tnn_predict(store, sample.features, float("inf"))
            records.append(
                metrics.EvalRecord(
                    true_label=truth, predicted_label=pred.label, score=pred.score
                )
            )
    return records


def run_experiment(
    config: ExperimentConfig, samples: list[LabeledSample] | None = None
) -> RunReport:
    """Run one configured experiment and return its report.

    ``samples`` overrides data loading (useful for in-memory datasets);
    otherwise ``config.data`` is either ``"synth"`` or a feature file path.
    """
    data = samples if samples is not None else _load_data(config)
    stream = _build_stream(config, data)
    evm_config = config.evm_config()
    cluster_params = (
        ClusterParams(config.cluster_epsilon, config.cluster_min_points)
        if config.method in _CLUSTERED
        else None
    )

    model: EVMModel | None = None
    store: baselines.NNStore | None = (
        baselines.NNStore(metric=config.metric) if config.method in ("osnn", "tnn") else None
    )
    history: list[LabeledSample] = []
    seen: set[str] = set()
    samples_seen = 0
    epochs: list[EpochStats] = []
    timings: list[EpochTimings] = []

    with counters.collect() as bundle:
        for (epoch, batch), open_value in zip(stream.batches, stream.openness_schedule):
            samples_seen += len(batch)
            seen |= {s.label for s in batch}

            t0 = time.perf_counter()
            ratio: float | None = None
            if config.method in _EVM_METHODS:
                effective = (
                    _cluster_batch(batch, cluster_params, config.metric)
                    if cluster_params
                    else batch
                )
                if model is not None:
                    ratio = fitting.update_ratio(model, effective)
                if config.method in ("evm", "c-evm"):
                    history.extend(effective)
                    model = fitting.batch_fit(history, evm_config)
                elif model is None:
                    model = fitting.batch_fit(effective, evm_config)
                else:
                    fitting.partial_fit(model, effective)
            else:
                baselines.nn_partial_fit(store, batch)
            t1 = time.perf_counter()

            if model is not None and config.reduction != "none":
                _reduce_model(model, config)
            t2 = time.perf_counter()

            records = _evaluate(config, model, store, stream.test_set, seen)
            result = metrics.dir_at_far(records, list(config.far_targets), config.averaging)
            t3 = time.perf_counter()

            counts = model.ev_counts() if model is not None else _store_counts(store)
            epochs.append(
                EpochStats(
                    epoch=epoch,
                    samples_seen=samples_seen,
                    openness=open_value,
                    update_ratio=ratio,
                    ev_counts=counts,
                    dir_at_far=[
                        {"far_target": t, "dir": v}
                        for t, v in zip(result.far_targets, result.dir_values)
                    ],
                    counters=bundle.snapshot().as_dict(),
                )
            )
            timings.append(EpochTimings(epoch, t1 - t0, t2 - t1, t3 - t2))

    return RunReport(
        config=config.as_dict(), backend=active_backend(), epochs=epochs, timings=timings
    )


def _store_counts(store: baselines.NNStore | None) -> dict[str, int]:
    counts: dict[str, int] = {}
    if store is not None:
        for sample in store.samples:
            counts[sample.label] = counts.get(sample.label, 0) + 1
    return counts


_CSV_COLUMNS = [
    "epoch",
    "samples_seen",
    "openness",
    "far_target",
    "dir",
    "ev_count",
    "update_ratio",
    "weibull_refits",
    "distance_evals",
    "greedy_selections",
    "bisection_iterations",
]


def emit_report(
    report: RunReport,
    path: str | Path,
    fmt: str = "json",
    include_timings: bool = False,
) -> None:
    """Write a report as JSON (structure mirror) or CSV (one row per epoch
    and FAR target). Timings are excluded unless requested, keeping
    identical-seed runs byte-identical."""
    if fmt == "json":
        doc = {
            "config": report.config,
            "backend": report.backend,
            "epochs": [
                {
                    "epoch": e.epoch,
                    "samples_seen": e.samples_seen,
                    "openness": e.openness,
                    "update_ratio": e.update_ratio,
                    "ev_counts": e.ev_counts,
                    "dir_at_far": e.dir_at_far,
                    "counters": e.counters,
                }
                for e in report.epochs
            ],
        }
        if include_timings:
            doc["timings"] = [
                {
                    "epoch": t.epoch,
                    "fit_seconds": t.fit_seconds,
                    "reduce_seconds": t.reduce_seconds,
                    "eval_seconds": t.eval_seconds,
                }
                for t in report.timings
            ]
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    elif fmt == "csv":
        lines = [",".join(_CSV_COLUMNS)]
        for e in report.epochs:
            total_evs = sum(e.ev_counts.values())
            ratio = "" if e.update_ratio is None else repr(e.update_ratio)
            for cell in e.dir_at_far:
                lines.append(
                    ",".join(
                        [
                            str(e.epoch),
                            str(e.samples_seen),
                            repr(e.openness),
                            repr(cell["far_target"]),
                            repr(cell["dir"]),
                            str(total_evs),
                            ratio,
                            str(e.counters["weibull_refits"]),
                            str(e.counters["distance_evals"]),
                            str(e.counters["greedy_selections"]),
                            str(e.counters["bisection_iterations"]),
                        ]
                    )
                )
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        raise ConfigError(f"report format must be json or csv, got {fmt!r}")
