import numpy as np
import pytest

import ievm
import oracles
from ievm import counters, reduction
from ievm.core import WeibullParams
from ievm.errors import EVMError
from ievm.model import ExtremeVector


def random_evs(rng, n, dim=3, label="a"):
    evs = []
    for _ in range(n):
        anchor = rng.normal(size=dim)
        shape = float(rng.uniform(0.8, 4.0))
        scale = float(rng.uniform(0.5, 3.0))
        tail = np.sort(rng.uniform(0.5, 5.0, size=4))
        evs.append(
            ExtremeVector(
                anchor=anchor,
                label=label,
                params=WeibullParams(shape, scale, float(tail[-1])),
                tail=tail,
            )
        )
    return evs


class TestInclusionRows:
    def test_diagonal_is_one(self, rng):
        evs = random_evs(rng, 6)
        rows = reduction.inclusion_rows(evs, "euclidean")
        np.testing.assert_array_equal(np.diag(rows), 1.0)

    def test_matches_naive(self, rng):
        evs = random_evs(rng, 7)
        rows = reduction.inclusion_rows(evs, "euclidean")
        anchors = np.stack([ev.anchor for ev in evs])
        shapes = np.array([ev.params.shape for ev in evs])
        scales = np.array([ev.params.scale for ev in evs])
        naive = oracles.naive_inclusion_matrix(anchors, shapes, scales)
        np.testing.assert_allclose(rows, naive, rtol=1e-12, atol=1e-15)

    def test_empty(self):
        assert reduction.inclusion_rows([], "euclidean").shape == (0, 0)


class TestReduceWKSC:
    def test_matches_naive_greedy_exactly(self, rng):
        for trial in range(30):
            n = int(rng.integers(1, 12))
            budget = int(rng.integers(1, 6))
            evs = random_evs(rng, n)
            rows = reduction.inclusion_rows(evs, "euclidean")
            cache = rows.sum(axis=1)
            kept, _ = reduction.reduce_wksc(evs, cache, budget)
            expected = oracles.naive_wksc_greedy(rows, budget)
            got = [evs.index(ev) for ev in kept]
            assert got == expected, f"trial {trial}"

    def test_selection_count_is_min_budget_n(self, rng):
        evs = random_evs(rng, 5)
        cache = reduction.coverage_sums(evs, "euclidean")
        kept, _ = reduction.reduce_wksc(evs, cache.copy(), 3)
        assert len(kept) == 3
        kept_all, _ = reduction.reduce_wksc(evs, cache.copy(), 50)
        assert len(kept_all) == 5

    def test_no_bisection_and_counted_selections(self, rng):
        evs = random_evs(rng, 8)
        cache = reduction.coverage_sums(evs, "euclidean")
        with counters.collect() as bundle:
            reduction.reduce_wksc(evs, cache, 4)
        snap = bundle.as_dict()
        assert snap["greedy_selections"] == 4
        assert snap["bisection_iterations"] == 0

    def test_updated_cache_covers_kept_set_only(self, rng):
        evs = random_evs(rng, 9)
        cache = reduction.coverage_sums(evs, "euclidean")
        kept, new_cache = reduction.reduce_wksc(evs, cache, 4)
        fresh = reduction.coverage_sums(kept, "euclidean")
        np.testing.assert_allclose(new_cache, fresh, rtol=1e-9, atol=1e-12)

    def test_both_cache_rebuild_paths_agree(self, rng):
        reduction.VERIFY_CACHE_PATHS = True
        try:
            for n, budget in [(10, 7), (10, 3), (6, 3), (12, 11)]:
                evs = random_evs(rng, n)
                cache = reduction.coverage_sums(evs, "euclidean")
                kept, new_cache = reduction.reduce_wksc(evs, cache, budget)
                fresh = reduction.coverage_sums(kept, "euclidean")
                np.testing.assert_allclose(new_cache, fresh, rtol=1e-9, atol=1e-12)
        finally:
            reduction.VERIFY_CACHE_PATHS = False

    def test_lowest_index_wins_ties(self):
        # two identical anchors produce identical coverage sums
        base = random_evs(np.random.default_rng(0), 1)[0]
        twin = ExtremeVector(
            anchor=base.anchor.copy(), label="a", params=base.params, tail=base.tail.copy()
        )
        evs = [base, twin]
        cache = reduction.coverage_sums(evs, "euclidean")
        kept, _ = reduction.reduce_wksc(evs, cache, 1)
        assert kept[0] is base

    def test_bad_budget(self, rng):
        evs = random_evs(rng, 3)
        with pytest.raises(EVMError):
            reduction.reduce_wksc(evs, np.ones(3), 0)

    def test_misaligned_cache(self, rng):
        evs = random_evs(rng, 3)
        with pytest.raises(EVMError, match="cache"):
            reduction.reduce_wksc(evs, np.ones(2), 1)

    def test_empty_candidates(self):
        kept, cache = reduction.reduce_wksc([], np.zeros(0), 2)
        assert kept == [] and cache.shape == (0,)


class TestReduceSetCover:
    def test_kept_set_covers_everything(self, rng):
        for _ in range(20):
            evs = random_evs(rng, int(rng.integers(2, 10)))
            thr = float(rng.uniform(0.1, 0.9))
            kept = reduction.reduce_set_cover(evs, thr)
            rows = reduction.inclusion_rows(evs, "euclidean")
            covers = rows >= thr
            kept_idx = [evs.index(ev) for ev in kept]
            assert covers[kept_idx].any(axis=0).all()

    def test_matches_naive_greedy(self, rng):
        for _ in range(20):
            evs = random_evs(rng, int(rng.integers(2, 10)))
            thr = float(rng.uniform(0.1, 0.9))
            covers = reduction.inclusion_rows(evs, "euclidean") >= thr
            kept = reduction.reduce_set_cover(evs, thr)
            assert [evs.index(ev) for ev in kept] == oracles.naive_set_cover(covers)

    def test_greedy_within_log_factor_of_optimum(self, rng):
        # classic guarantee: greedy cover size <= H(n) * optimum
        for _ in range(10):
            n = int(rng.integers(2, 9))
            evs = random_evs(rng, n)
            covers = reduction.inclusion_rows(evs, "euclidean") >= 0.3
            kept = reduction.reduce_set_cover(evs, 0.3)
            opt = oracles.exact_min_cover_size(covers)
            harmonic = sum(1.0 / k for k in range(1, n + 1))
            assert opt <= len(kept) <= int(np.ceil(harmonic * opt))

    def test_threshold_validation(self, rng):
        evs = random_evs(rng, 3)
        for thr in (0.0, 1.0, -0.5):
            with pytest.raises(EVMError):
                reduction.reduce_set_cover(evs, thr)

    def test_empty(self):
        assert reduction.reduce_set_cover([], 0.5) == []


class TestReduceSetCoverBudget:
    def test_fits_budget(self, rng):
        for _ in range(15):
            evs = random_evs(rng, int(rng.integers(2, 14)))
            budget = int(rng.integers(1, 6))
            kept = reduction.reduce_set_cover_budget(evs, budget, 0.05)
            assert 1 <= len(kept) <= budget

    def test_small_candidate_set_returned_whole(self, rng):
        evs = random_evs(rng, 3)
        kept = reduction.reduce_set_cover_budget(evs, 5, 0.05)
        assert kept == evs

    def test_bisection_iteration_count(self, rng):
        # interval (1e-6, 1 - 1e-6) halves to below 0.05 in 5 steps
        evs = []
        for _ in range(12):
            evs.extend(random_evs(rng, 1))
        with counters.collect() as bundle:
            kept = reduction.reduce_set_cover_budget(evs, 3, 0.05)
        snap = bundle.as_dict()
        if 0 < snap["bisection_iterations"]:
            assert snap["bisection_iterations"] == 5
        assert len(kept) <= 3

    def test_truncation_when_even_loosest_cover_overflows(self):
        # far-apart anchors with tiny scales: nobody covers anybody else,
        # every threshold needs all n candidates
        evs = []
        for i in range(6):
            evs.append(
                ExtremeVector(
                    anchor=np.array([float(100 * i), 0.0]),
                    label="a",
                    params=WeibullParams(2.0, 0.5, 1.0),
                    tail=np.array([1.0]),
                )
            )
        kept = reduction.reduce_set_cover_budget(evs, 2, 0.05)
        assert len(kept) == 2
        assert kept[0] is evs[0] and kept[1] is evs[1]

    def test_validation(self, rng):
        evs = random_evs(rng, 5)
        with pytest.raises(EVMError):
            reduction.reduce_set_cover_budget(evs, 0, 0.05)
        with pytest.raises(EVMError):
            reduction.reduce_set_cover_budget(evs, 2, 0.0)


class TestDBSCAN:
    def sample(self, coords, label="a"):
        return [ievm.LabeledSample(np.asarray(c, dtype=np.float64), label) for c in coords]

    def test_two_clusters_one_noise(self):
        batch = self.sample(
            [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0], [5.1, 5.0], [5.0, 5.1], [50.0, 50.0]]
        )
        out = reduction.dbscan_centroids(batch, reduction.ClusterParams(0.5, 3))
        assert len(out) == 3
        np.testing.assert_allclose(out[0].features, [0.1 / 3, 0.1 / 3])
        np.testing.assert_allclose(out[1].features, [5.0 + 0.1 / 3, 5.0 + 0.1 / 3])
        np.testing.assert_array_equal(out[2].features, [50.0, 50.0])

    def test_all_noise_passthrough(self):
        batch = self.sample([[0.0], [10.0], [20.0]])
        out = reduction.dbscan_centroids(batch, reduction.ClusterParams(1.0, 2))
        assert len(out) == 3
        for before, after in zip(batch, out):
            np.testing.assert_array_equal(before.features, after.features)

    def test_chain_merges_through_core_points(self):
        # points 1 apart with eps 1.1: one long chain, single cluster
        batch = self.sample([[float(i)] for i in range(6)])
        out = reduction.dbscan_centroids(batch, reduction.ClusterParams(1.1, 2))
        assert len(out) == 1
        np.testing.assert_allclose(out[0].features, [2.5])

    def test_border_point_joins_first_claiming_cluster(self):
        # 8.0 is within eps of a core on each side but is not core itself;
        # the cluster discovered first (lowest-index seed) claims it
        coords = [[0.0], [1.0], [2.0], [3.0], [4.0], [8.0], [12.0], [13.0], [14.0], [15.0], [16.0]]
        out = reduction.dbscan_centroids(self.sample(coords), reduction.ClusterParams(4.0, 5))
        assert len(out) == 2
        np.testing.assert_allclose(out[0].features, [3.0])
        np.testing.assert_allclose(out[1].features, [14.0])

    def test_labels_preserved(self):
        batch = self.sample([[0.0], [0.1]], label="z")
        out = reduction.dbscan_centroids(batch, reduction.ClusterParams(1.0, 2))
        assert all(s.label == "z" for s in out)

    def test_mixed_labels_rejected(self):
        batch = [ievm.LabeledSample(np.zeros(1), "a"), ievm.LabeledSample(np.zeros(1), "b")]
        with pytest.raises(EVMError, match="single-class"):
            reduction.dbscan_centroids(batch, reduction.ClusterParams(1.0, 2))

    def test_empty(self):
        assert reduction.dbscan_centroids([], reduction.ClusterParams(1.0, 2)) == []

    def test_bad_params(self):
        with pytest.raises(EVMError):
            reduction.ClusterParams(0.0, 2)
        with pytest.raises(EVMError):
            reduction.ClusterParams(1.0, 0)
