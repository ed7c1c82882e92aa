"""Selection strategies: correctness, determinism and statistical behavior."""

import itertools
import math

import numpy as np
import pytest
from scipy import stats

from sim2real_al.sampling import (SelectionConfig, bald_scores,
                                  covering_radius, select_batchbald,
                                  select_clue, select_coreset, select_random,
                                  select_subsample_topn, select_topn,
                                  subsample_size)


class TestSelectionConfig:
    def test_defaults_valid(self):
        cfg = SelectionConfig()
        assert cfg.batch_size >= 1

    def test_rejects_unknown_strategy(self):
        with pytest.raises(ValueError, match="unknown strategy"):
            SelectionConfig(strategy="magic")

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            SelectionConfig(batch_size=0)
        with pytest.raises(ValueError):
            SelectionConfig(subsample_fraction=0.0)
        with pytest.raises(ValueError):
            SelectionConfig(subsample_fraction=1.5)


class TestSelectRandom:
    def test_whole_pool(self):
        out = select_random([4, 7, 9], 3, seed=0)
        assert sorted(out) == [4, 7, 9]

    def test_oversized_batch_rejected(self):
        with pytest.raises(ValueError):
            select_random([1, 2], 3, seed=0)

    def test_deterministic(self):
        pool = list(range(50))
        assert select_random(pool, 10, seed=42) == select_random(pool, 10, seed=42)

    def test_uniformity_chi_square(self):
        pool = list(range(10))
        counts = np.zeros(10)
        for rep in range(10_000):
            counts[select_random(pool, 1, seed=rep)[0]] += 1
        assert stats.chisquare(counts).pvalue > 0.001


class TestSelectTopn:
    def test_basic(self):
        assert select_topn([("a", 3.0), ("b", 1.0), ("c", 2.0)], 2) == ["a", "c"]

    def test_ties_break_to_smaller_id(self):
        assert select_topn([(3, 1.0), (1, 1.0), (2, 1.0)], 2) == [1, 2]

    def test_full_pool_sorted_desc(self):
        out = select_topn([(0, 0.2), (1, 0.9), (2, 0.5)], 3)
        assert out == [1, 2, 0]

    def test_oversized_batch_rejected(self):
        with pytest.raises(ValueError):
            select_topn([(0, 1.0)], 2)


class TestSelectSubsampleTopn:
    def test_p_one_equals_topn(self):
        rng = np.random.default_rng(3)
        for trial in range(50):
            n = int(rng.integers(5, 40))
            ids = list(rng.choice(1000, size=n, replace=False))
            scores = {i: float(rng.normal()) for i in ids}
            b = int(rng.integers(1, n + 1))
            got = select_subsample_topn(ids, scores.__getitem__, 1.0, b, seed=trial)
            want = select_topn([(i, scores[i]) for i in ids], b)
            assert got == want

    def test_output_within_subsample(self):
        pool = list(range(60))
        scores = {i: float(i) for i in pool}
        out = select_subsample_topn(pool, scores.__getitem__, 0.4, 5, seed=9)
        assert len(out) == 5 and len(set(out)) == 5
        assert set(out) <= set(pool)

    def test_oracle_redraw(self):
        """Independent re-implementation of the sub-sample draw."""
        pool = list(range(100))
        scores = {i: float(i) for i in pool}
        seed = 1234
        out = select_subsample_topn(pool, scores.__getitem__, 0.5, 5, seed=seed)
        rng = np.random.default_rng(seed)
        drawn = [pool[i] for i in rng.choice(100, size=50, replace=False)]
        expected = sorted(drawn, key=lambda i: (-scores[i], i))[:5]
        assert out == expected

    def test_too_small_subsample_rejected(self):
        with pytest.raises(ValueError, match="sub-sample too small"):
            select_subsample_topn(list(range(10)), float, 0.2, 3, seed=0)

    def test_subsample_size(self):
        assert subsample_size(0.5, 100) == 50
        assert subsample_size(0.011, 100) == 2
        assert subsample_size(1.0, 7) == 7

    def test_label_shift_mitigation(self):
        """Label-independent scores: selected labels follow pool labels."""
        rng = np.random.default_rng(0)
        n = 1000
        labels = rng.choice(4, size=n, p=[0.55, 0.25, 0.15, 0.05])
        pool = list(range(n))
        picked = np.zeros(4)
        for draw in range(300):
            # fresh scores per draw, independent of the labels
            scores = np.random.default_rng(10_000 + draw).normal(size=n)
            ids = select_subsample_topn(pool, lambda i: scores[i], 0.1, 10,
                                        seed=draw)
            for i in ids:
                picked[labels[i]] += 1
        expected = np.bincount(labels, minlength=4) / n * picked.sum()
        assert stats.chisquare(picked, expected).pvalue > 0.001


class TestSelectCoreset:
    def test_greedy_sequence(self):
        labeled = [(0.0, 0.0)]
        pool = [(10.0, 0.0), (0.0, 10.0), (1.0, 0.0)]
        assert select_coreset(pool, labeled, 2) == [0, 1]

    def test_empty_labeled_centroid_convention(self):
        pool = [(0.0, 0.0), (4.0, 0.0), (1.9, 0.0)]
        # centroid (1.966, 0): farthest is id 0 (dist 1.966 vs 2.033)...
        out = select_coreset(pool, [], 1)
        centroid = np.mean(pool, axis=0)
        dists = [np.linalg.norm(np.array(p) - centroid) for p in pool]
        assert out == [int(np.argmax(dists))]

    def test_identical_points_id_order(self):
        pool = [(1.0, 1.0)] * 5
        assert select_coreset(pool, [], 3) == [0, 1, 2]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimensions differ"):
            select_coreset([(1.0, 2.0)], [(1.0, 2.0, 3.0)], 1)

    def test_two_approximation_exhaustive(self):
        """Greedy radius <= 2x brute-force optimum, |pool| <= 12, B <= 3."""
        rng = np.random.default_rng(7)
        for trial in range(24):
            n = int(rng.integers(4, 13))
            b = int(rng.integers(1, 4))
            pool = rng.uniform(0, 10, size=(n, 2))
            labeled = rng.uniform(0, 10, size=(rng.integers(0, 3), 2))
            lab = labeled if labeled.size else []
            greedy = select_coreset(pool, lab, b)
            greedy_radius = covering_radius(pool, greedy, lab if len(lab) else None)
            best = min(covering_radius(pool, list(subset),
                                       lab if len(lab) else None)
                       for subset in itertools.combinations(range(n), b))
            assert greedy_radius <= 2.0 * best + 1e-9


class TestBatchBald:
    def test_bald_opposite_one_hots(self):
        samples = np.array([[[1.0, 0.0], [0.0, 1.0]]])  # one item, T=2
        assert bald_scores(samples)[0] == pytest.approx(math.log(2), abs=1e-9)
        assert select_batchbald(samples, 1, seed=0) == [0]

    def test_bald_identical_samples_zero(self):
        samples = np.tile([0.3, 0.7], (1, 5, 1))
        assert bald_scores(samples)[0] == pytest.approx(0.0, abs=1e-12)

    def test_bald_nonnegative(self):
        rng = np.random.default_rng(11)
        probs = rng.dirichlet(np.ones(4), size=(30, 8))
        assert bald_scores(probs).min() >= -1e-12

    def test_t1_rejected(self):
        with pytest.raises(ValueError, match="mutual information undefined"):
            select_batchbald(np.ones((3, 1, 2)) * 0.5, 1)

    def test_greedy_avoids_correlated_pair(self):
        """Two perfectly correlated items; greedy must pick the independent one."""
        # items 0, 1 flip with the "first bit" of theta; item 2 with the second
        item_a = [[1, 0], [1, 0], [0, 1], [0, 1]]
        item_c = [[1, 0], [0, 1], [1, 0], [0, 1]]
        probs = np.array([item_a, item_a, item_c], dtype=float)
        got = select_batchbald(probs, 2, mc_count=100, seed=5)
        assert got == [0, 2]

        # brute-force joint-MI oracle over all pairs
        def joint_mi(i, j):
            joint = np.zeros((2, 2))
            for t in range(4):
                for yi in range(2):
                    for yj in range(2):
                        joint[yi, yj] += probs[i, t, yi] * probs[j, t, yj] / 4
            h_joint = -sum(p * math.log(p) for p in joint.ravel() if p > 0)
            h_cond = 0.0
            for t in range(4):
                for item in (i, j):
                    h_cond += -sum(p * math.log(p)
                                   for p in probs[item, t] if p > 0) / 4
            return h_joint - h_cond

        best_pair = max(itertools.combinations(range(3), 2), key=lambda ij: joint_mi(*ij))
        assert joint_mi(*best_pair) == pytest.approx(joint_mi(0, 2), abs=1e-12)

    def test_deterministic(self):
        rng = np.random.default_rng(13)
        probs = rng.dirichlet(np.ones(3), size=(20, 6))
        a = select_batchbald(probs, 4, mc_count=50, seed=3)
        b = select_batchbald(probs, 4, mc_count=50, seed=3)
        assert a == b
        assert len(set(a)) == 4


class TestSelectClue:
    def test_whole_pool(self):
        pool = np.random.default_rng(0).normal(size=(6, 2))
        out = select_clue(pool, np.ones(6), 6, seed=1)
        assert sorted(out) == list(range(6))

    def test_weight_concentration(self):
        pool = np.array([[0.0, 0.0], [5.0, 5.0], [9.0, 1.0], [2.0, 8.0]])
        weights = np.array([0.0, 1.0, 0.0, 0.0])
        assert select_clue(pool, weights, 1, seed=2) == [1]

    def test_two_blobs_one_each(self):
        rng = np.random.default_rng(3)
        blob_a = rng.normal([0, 0], 0.3, size=(8, 2))
        blob_b = rng.normal([10, 10], 0.3, size=(8, 2))
        pool = np.vstack([blob_a, blob_b])
        out = select_clue(pool, np.ones(16), 2, seed=4)
        assert len(out) == 2
        sides = {int(i >= 8) for i in out}
        assert sides == {0, 1}

    def test_two_blobs_brute_force_objective(self):
        """The blob split minimizes the weighted k-means objective over
        every 2-partition of a tiny instance, and clue recovers it."""
        pool = np.array([[0.0, 0.0], [0.5, 0.0], [10.0, 10.0], [10.5, 10.0]])
        weights = np.array([1.0, 2.0, 1.5, 1.0])

        def objective(groups):
            total = 0.0
            for members in groups:
                w = weights[members]
                centroid = (pool[members] * w[:, None]).sum(0) / w.sum()
                total += (w * ((pool[members] - centroid) ** 2).sum(1)).sum()
            return total

        partitions = [([0], [1, 2, 3]), ([1], [0, 2, 3]), ([2], [0, 1, 3]),
                      ([3], [0, 1, 2]), ([0, 1], [2, 3]), ([0, 2], [1, 3]),
                      ([0, 3], [1, 2])]
        best = min(partitions, key=objective)
        assert sorted(map(sorted, best)) == [[0, 1], [2, 3]]
        out = select_clue(pool, weights, 2, seed=5)
        assert {int(i >= 2) for i in out} == {0, 1}

    def test_all_zero_weights_warns(self):
        pool = np.random.default_rng(5).normal(size=(5, 2))
        with pytest.warns(UserWarning, match="all-zero"):
            out = select_clue(pool, np.zeros(5), 2, seed=6)
        assert len(set(out)) == 2

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        pool = rng.normal(size=(30, 3))
        w = rng.uniform(0, 1, size=30)
        assert select_clue(pool, w, 5, seed=9) == select_clue(pool, w, 5, seed=9)


class TestAllStrategiesContract:
    """Every selector returns exactly B distinct pool ids, deterministically."""

    def test_b_distinct_ids_from_pool(self):
        rng = np.random.default_rng(17)
        for trial in range(10):
            n = int(rng.integers(8, 30))
            b = int(rng.integers(1, 6))
            ids = list(range(n))
            feats = rng.normal(size=(n, 3))
            scores = {i: float(rng.normal()) for i in ids}
            probs = rng.dirichlet(np.ones(3), size=(n, 4))
            outs = {
                "random": select_random(ids, b, seed=trial),
                "topn": select_topn(list(scores.items()), b),
                "subsample_topn": select_subsample_topn(
                    ids, scores.__getitem__, 0.9, b, seed=trial),
                "coreset": select_coreset(feats, [], b),
                "batchbald": select_batchbald(probs, b, mc_count=20, seed=trial),
                "clue": select_clue(feats, np.abs(rng.normal(size=n)) + 0.1,
                                    b, seed=trial),
            }
            for name, out in outs.items():
                assert len(out) == b, name
                assert len(set(out)) == b, name
                assert set(out) <= set(ids), name
