"""Incremental extreme value machine for open-set classification.

Weibull tail models over per-anchor distances give each training sample a
radial inclusion probability; queries score against every class's extreme
vectors and are rejected as ``"unknown"`` below a threshold. Models fit in
batches or incrementally, and can be kept small under a per-class budget.
"""

from .backends import active_backend, available_backends, set_backend
from .baselines import NNStore, nn_partial_fit, osnn_predict, tnn_predict
from .core import (
    UNKNOWN_LABEL,
    LabeledSample,
    WeibullParams,
    distance,
    fit_weibull,
    inclusion_probabilities,
    inclusion_probability,
    pairwise_distances,
)
from .counters import Counters, collect
from .errors import ConfigError, DataFormatError, EVMError
from .fitting import batch_fit, fit_anchor, partial_fit, update_ratio
from .harness import (
    ExperimentConfig,
    RunReport,
    emit_report,
    run_experiment,
    synth_blobs,
)
from .io import (
    convert_features,
    load_features,
    load_model,
    save_features,
    save_model,
)
from .metrics import (
    ConfusionSummary,
    DirFarResult,
    EvalRecord,
    confusion_summary,
    derive_threshold,
    dir_at_far,
)
from .model import EVMConfig, EVMModel, ExtremeVector, empty_model
from .predict import Prediction, predict, score_matrix
from .protocols import (
    ProtocolStream,
    openness,
    protocol1_generate,
    protocol2_generate,
    stream_from_manifest,
    stream_manifest,
)
from .reduction import (
    ClusterParams,
    dbscan_centroids,
    reduce_set_cover,
    reduce_set_cover_budget,
    reduce_wksc,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "UNKNOWN_LABEL",
    "EVMError",
    "ConfigError",
    "DataFormatError",
    "LabeledSample",
    "WeibullParams",
    "distance",
    "pairwise_distances",
    "fit_weibull",
    "inclusion_probability",
    "inclusion_probabilities",
    "Counters",
    "collect",
    "EVMConfig",
    "EVMModel",
    "ExtremeVector",
    "empty_model",
    "batch_fit",
    "fit_anchor",
    "partial_fit",
    "update_ratio",
    "Prediction",
    "predict",
    "score_matrix",
    "ClusterParams",
    "dbscan_centroids",
    "reduce_wksc",
    "reduce_set_cover",
    "reduce_set_cover_budget",
    "NNStore",
    "nn_partial_fit",
    "osnn_predict",
    "tnn_predict",
    "ProtocolStream",
    "openness",
    "protocol1_generate",
    "protocol2_generate",
    "stream_manifest",
    "stream_from_manifest",
    "EvalRecord",
    "DirFarResult",
    "ConfusionSummary",
    "derive_threshold",
    "dir_at_far",
    "confusion_summary",
    "load_features",
    "save_features",
    "convert_features",
    "load_model",
    "save_model",
    "ExperimentConfig",
    "RunReport",
    "run_experiment",
    "emit_report",
    "synth_blobs",
    "set_backend",
    "active_backend",
    "available_backends",
]
