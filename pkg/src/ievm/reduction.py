"""Model reduction: budgeted greedy coverage, set cover, and density
preconditioning.

All routines here are class-local: candidates belong to one class and
coverage is measured between same-class anchors. The budgeted reduction
keeps exactly ``budget`` extreme vectors per class in one greedy pass over
cached coverage sums; the set-cover baseline instead searches a coverage
threshold and needs one full greedy cover per probed threshold.

Coverage bookkeeping convention: ``sums[i]`` is the sum over all current
candidates j (i itself included) of EV i's inclusion probability at anchor
j. The self term is exactly 1 for every candidate, so it can never change
which candidate attains the maximum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core, counters
from .core import LabeledSample
from .errors import EVMError
from .model import ExtremeVector

#: When True (enabled by tests), the shortcut cache rebuild inside
#: reduce_wksc is cross-checked against the unconditional rebuild.
VERIFY_CACHE_PATHS = False

# Bisection endpoints for the budgeted set cover.
_THRESHOLD_LO = 1e-6
_THRESHOLD_HI = 1.0 - 1e-6


def _stack_anchors(evs: list[ExtremeVector]) -> np.ndarray:
    return np.stack([ev.anchor for ev in evs])


def inclusion_rows(evs: list[ExtremeVector], metric: str) -> np.ndarray:
    """Matrix R with R[i, j] = inclusion probability of EV i evaluated at
    the anchor of EV j. R[i, i] == 1."""
    if not evs:
        return np.zeros((0, 0))
    anchors = _stack_anchors(evs)
    dists = core.pairwise_distances(anchors, anchors, metric)
    shapes = np.array([ev.params.shape for ev in evs])
    scales = np.array([ev.params.scale for ev in evs])
    # inclusion_probabilities parameterises columns; transposing the
    # symmetric distance matrix's result puts parameters on rows.
    return core.inclusion_probabilities(shapes, scales, dists).T


def coverage_sums(evs: list[ExtremeVector], metric: str) -> np.ndarray:
    """Fresh coverage sums over the given candidate set (self included)."""
    if not evs:
        return np.zeros(0)
    return inclusion_rows(evs, metric).sum(axis=1)


def reduce_wksc(
    candidates: list[ExtremeVector],
    cache: np.ndarray,
    budget: int,
    metric: str = "euclidean",
) -> tuple[list[ExtremeVector], np.ndarray]:
    """Budgeted reduction by greedy weighted maximum coverage.

    Runs exactly ``min(budget, len(candidates))`` greedy selections on the
    cached coverage sums. After each pick the pick's incoming coverage is
    subtracted from every remaining candidate's sum, so a pair of mutually
    covering candidates is only credited in one direction. No coverage
    threshold is ever probed.

    Parameters
    ----------
    candidates : extreme vectors of one class.
    cache : coverage sums aligned with ``candidates`` (see module note).
    budget : positive per-class cap.
    metric : distance metric of the model.

    Returns
    -------
    (kept, updated_cache)
        Kept EVs in selection order, and coverage sums rebuilt over the
        kept set only, aligned with ``kept``.
    """
    if budget < 1:
        raise EVMError(f"budget must be positive, got {budget}")
    cache = np.asarray(cache, dtype=np.float64)
    n = len(candidates)
    if cache.shape != (n,):
        raise EVMError(f"cache length {cache.shape} does not match {n} candidates")
    if n == 0:
        return [], np.zeros(0)

    rows = inclusion_rows(candidates, metric)
    work = cache.copy()
    alive = np.ones(n, dtype=bool)
    selected: list[int] = []
    for _ in range(min(budget, n)):
        masked = np.where(alive, work, -np.inf)
        pick = int(np.argmax(masked))  # ties resolve to the lowest index
        selected.append(pick)
        counters.add("greedy_selections")
        work[alive] -= rows[alive, pick]
        alive[pick] = False

    kept = [candidates[i] for i in selected]
    keep_idx = np.array(selected, dtype=np.intp)
    n_kept = len(selected)

    dropped = np.flatnonzero(~np.isin(np.arange(n), keep_idx))
    if n > n_kept and n_kept > n - n_kept:
        # Cheaper to subtract the few dropped contributions from the
        # original sums than to rebuild over the kept set.
        new_cache = cache[keep_idx] - rows[np.ix_(keep_idx, dropped)].sum(axis=1)
        if VERIFY_CACHE_PATHS:
            full = rows[np.ix_(keep_idx, keep_idx)].sum(axis=1)
            np.testing.assert_allclose(new_cache, full, rtol=1e-9, atol=1e-12)
    else:
        new_cache = rows[np.ix_(keep_idx, keep_idx)].sum(axis=1)
    return kept, new_cache


def reduce_set_cover(
    candidates: list[ExtremeVector],
    coverage_threshold: float,
    metric: str = "euclidean",
) -> list[ExtremeVector]:
    """Greedy minimum set cover of the candidates.

    A candidate covers every candidate whose anchor it includes with
    probability >= ``coverage_threshold`` (itself always, probability 1).
    Repeatedly keeps the candidate covering the most uncovered anchors
    (ties to the lowest index) until everything is covered. Returns the
    kept EVs in selection order.
    """
    if not (0.0 < coverage_threshold < 1.0):
        raise EVMError(
            f"coverage_threshold must be in (0, 1), got {coverage_threshold}"
        )
    n = len(candidates)
    if n == 0:
        return []
    covers = inclusion_rows(candidates, metric) >= coverage_threshold
    covered = np.zeros(n, dtype=bool)
    kept: list[int] = []
    in_kept = np.zeros(n, dtype=bool)
    while not covered.all():
        gains = (covers & ~covered[None, :]).sum(axis=1)
        gains[in_kept] = -1
        pick = int(np.argmax(gains))
        kept.append(pick)
        in_kept[pick] = True
        covered |= covers[pick]
        counters.add("greedy_selections")
    return [candidates[i] for i in kept]


def reduce_set_cover_budget(
    candidates: list[ExtremeVector],
    budget: int,
    tolerance: float,
    metric: str = "euclidean",
) -> list[ExtremeVector]:
    """Budgeted set cover via bisection on the coverage threshold.

    Higher thresholds keep more EVs. The bisection searches the largest
    threshold whose greedy cover fits the budget, stopping when the
    bracketing interval is narrower than ``tolerance``; each probe is one
    full greedy cover. If even the smallest probed threshold needs more
    than ``budget`` EVs, that cover is truncated to its first ``budget``
    greedy picks.
    """
    if budget < 1:
        raise EVMError(f"budget must be positive, got {budget}")
    if not (0.0 < tolerance < 1.0):
        raise EVMError(f"tolerance must be in (0, 1), got {tolerance}")
    if len(candidates) <= budget:
        return list(candidates)

    lo, hi = _THRESHOLD_LO, _THRESHOLD_HI
    at_hi = reduce_set_cover(candidates, hi, metric)
    if len(at_hi) <= budget:
        return at_hi
    best = reduce_set_cover(candidates, lo, metric)
    if len(best) > budget:
        return best[:budget]
    while hi - lo >= tolerance:
        mid = 0.5 * (lo + hi)
        counters.add("bisection_iterations")
        cover = reduce_set_cover(candidates, mid, metric)
        if len(cover) <= budget:
            best, lo = cover, mid
        else:
            hi = mid
    return best


@dataclass(frozen=True)
class ClusterParams:
    """DBSCAN parameters for density preconditioning."""

    epsilon: float
    min_points: int

    def __post_init__(self) -> None:
        if not (self.epsilon > 0.0 and np.isfinite(self.epsilon)):
            raise EVMError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not isinstance(self.min_points, int) or self.min_points < 1:
            raise EVMError(f"min_points must be a positive integer, got {self.min_points}")


def dbscan_centroids(
    batch: list[LabeledSample], params: ClusterParams, metric: str = "euclidean"
) -> list[LabeledSample]:
    """Replace a single-class batch by DBSCAN cluster centroids.

    Core points have at least ``min_points`` neighbours within ``epsilon``
    (themselves included). Each cluster is emitted as the unweighted
    coordinate-wise mean of its members; noise points pass through
    unchanged. Output order: clusters in discovery order (seeded from the
    lowest-index core point), then noise points in input order.
    """
    if not batch:
        return []
    labels = {s.label for s in batch}
    if len(labels) != 1:
        raise EVMError(f"dbscan_centroids expects a single-class batch, got {sorted(labels)}")
    label = batch[0].label
    feats = np.stack([s.features for s in batch])
    n = feats.shape[0]
    dists = core.pairwise_distances(feats, feats, metric)
    neighbor = dists <= params.epsilon
    is_core = neighbor.sum(axis=1) >= params.min_points

    assignment = np.full(n, -1, dtype=np.intp)
    n_clusters = 0
    for seed in range(n):
        if not is_core[seed] or assignment[seed] != -1:
            continue
        cluster = n_clusters
        n_clusters += 1
        assignment[seed] = cluster
        frontier = [seed]
        while frontier:
            point = frontier.pop(0)
            if not is_core[point]:
                continue
            for other in np.flatnonzero(neighbor[point]):
                if assignment[other] == -1:
                    assignment[other] = cluster
                    frontier.append(int(other))

    out = []
    for cluster in range(n_clusters):
        members = feats[assignment == cluster]
        out.append(LabeledSample(members.mean(axis=0), label))
    for i in range(n):
        if assignment[i] == -1:
            out.append(LabeledSample(feats[i].copy(), label))
    return out
