"""Open-set evaluation metrics: detection-and-identification rate at a
false-accept-rate budget, plus confusion counts.

Records carry a threshold-free argmax prediction and a confidence score.
A sample whose ``true_label`` is the reserved token ``"unknown"`` is a true
unknown; everything else is a known. Thresholds are derived from the
unknown score distribution so that the achieved false accept rate never
exceeds the requested budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import UNKNOWN_LABEL
from .errors import EVMError


@dataclass(frozen=True)
class EvalRecord:
    """One evaluated test sample."""

    true_label: str
    predicted_label: str
    score: float

    def __post_init__(self) -> None:
        if not self.true_label or not self.predicted_label:
            raise EVMError("labels must be non-empty")
        if not math.isfinite(self.score):
            raise EVMError(f"score must be finite, got {self.score}")

    @property
    def is_unknown(self) -> bool:
        return self.true_label == UNKNOWN_LABEL


@dataclass(frozen=True)
class DirFarResult:
    """Detection-and-identification rates at the requested FAR targets."""

    far_targets: tuple[float, ...]
    thresholds: tuple[float, ...]
    dir_values: tuple[float, ...]
    averaging: str


@dataclass(frozen=True)
class ConfusionSummary:
    known_correct: int
    known_wrong: int
    known_rejected: int
    unknown_accepted: int
    unknown_rejected: int

    @property
    def total(self) -> int:
        return (
            self.known_correct
            + self.known_wrong
            + self.known_rejected
            + self.unknown_accepted
            + self.unknown_rejected
        )


def derive_threshold(records: list[EvalRecord], far_target: float) -> float:
    """Smallest score threshold whose false accept rate is within target.

    With U true unknowns, at most ``floor(far_target * U)`` of them may
    score at or above the threshold. The threshold is placed immediately
    above the first disqualifying unknown score, so tied unknown scores
    resolve conservatively (fewer acceptances, never more). A budget that
    admits every unknown returns the global score minimum.
    """
    if not (0.0 < far_target <= 1.0):
        raise EVMError(f"far_target must be in (0, 1], got {far_target}")
    unknown_scores = np.sort([r.score for r in records if r.is_unknown])[::-1]
    if unknown_scores.size == 0:
        raise EVMError("cannot derive a threshold without true-unknown records")
    allowed = math.floor(far_target * unknown_scores.size)
    if allowed >= unknown_scores.size:
        return float(min(r.score for r in records))
    return float(np.nextafter(unknown_scores[allowed], np.inf))


def _accepted(record: EvalRecord, threshold: float) -> bool:
    return record.score >= threshold


def dir_at_far(
    records: list[EvalRecord],
    far_targets: list[float],
    averaging: str = "micro",
) -> DirFarResult:
    """Detection-and-identification rate at each FAR target.

    A known record is detected-and-identified when its score clears the
    derived threshold and its predicted label equals its true label.
    ``micro`` divides by the number of known records; ``macro`` averages
    the per-class rates of the known classes present in the records.
    """
    if averaging not in ("micro", "macro"):
        raise EVMError(f"averaging must be 'micro' or 'macro', got {averaging!r}")
    if not far_targets:
        raise EVMError("far_targets must be non-empty")
    knowns = [r for r in records if not r.is_unknown]
    if not knowns:
        raise EVMError("dir_at_far requires at least one known record")

    thresholds = []
    values = []
    for target in far_targets:
        threshold = derive_threshold(records, target)
        thresholds.append(threshold)
        if averaging == "micro":
            hit = sum(
                1
                for r in knowns
                if _accepted(r, threshold) and r.predicted_label == r.true_label
            )
            values.append(hit / len(knowns))
        else:
            per_class = []
            for label in sorted({r.true_label for r in knowns}):
                members = [r for r in knowns if r.true_label == label]
                hit = sum(
                    1
                    for r in members
                    if _accepted(r, threshold) and r.predicted_label == r.true_label
                )
                per_class.append(hit / len(members))
            values.append(sum(per_class) / len(per_class))
    return DirFarResult(
        far_targets=tuple(float(t) for t in far_targets),
        thresholds=tuple(thresholds),
        dir_values=tuple(values),
        averaging=averaging,
    )


def apply_threshold(records: list[EvalRecord], threshold: float) -> list[EvalRecord]:
    """Map sub-threshold predictions to the rejection label."""
    return [
        r
        if _accepted(r, threshold)
        else EvalRecord(r.true_label, UNKNOWN_LABEL, r.score)
        for r in records
    ]


def confusion_summary(records: list[EvalRecord]) -> ConfusionSummary:
    """Partition records into the five open-set confusion cells.

    Rejection is read off ``predicted_label`` (the reserved token); pair
    with :func:`apply_threshold` to evaluate at a derived threshold.
    """
    kc = kw = kr = ua = ur = 0
    for r in records:
        if r.is_unknown:
            if r.predicted_label == UNKNOWN_LABEL:
                ur += 1
            else:
                ua += 1
        else:
            if r.predicted_label == UNKNOWN_LABEL:
                kr += 1
            elif r.predicted_label == r.true_label:
                kc += 1
            else:
                kw += 1
    return ConfusionSummary(kc, kw, kr, ua, ur)
