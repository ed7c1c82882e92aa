"""Acquisition: entropies, combination and per-image aggregation."""

import math

import numpy as np
import pytest

from sim2real_al.acquisition import (AcquisitionConfig, ImageScore,
                                     UncertaintyPair, categorical_entropy,
                                     cls_entropy, combine, reg_entropy,
                                     score_image)
from sim2real_al.fusion import FusedDetection


class TestClsEntropy:
    def test_max_entropy_bernoulli(self):
        assert cls_entropy([0.5]) == pytest.approx(math.log(2), abs=1e-12)

    def test_deterministic_classes(self):
        assert cls_entropy([1.0, 0.0]) == 0.0

    def test_hand_computed(self):
        # h(0.9) = 0.325083, h(0.2) = 0.500402
        assert cls_entropy([0.9, 0.2]) == pytest.approx(0.8254853969296361,
                                                        abs=1e-9)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            cls_entropy([0.5, 1.2])
        with pytest.raises(ValueError):
            cls_entropy([-0.1])

    def test_upper_bound(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            p = rng.uniform(0, 1, size=rng.integers(1, 10))
            assert cls_entropy(p) <= len(p) * math.log(2) + 1e-12

    def test_direct_summation_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            p = rng.uniform(0, 1, size=6)
            expected = sum(-pi * math.log(pi) - (1 - pi) * math.log(1 - pi)
                           for pi in p)
            assert cls_entropy(p) == pytest.approx(expected, abs=1e-12)


class TestCategoricalEntropy:
    def test_uniform_ten(self):
        assert categorical_entropy(np.full(10, 0.1)) == pytest.approx(
            math.log(10), abs=1e-12)

    def test_one_hot(self):
        assert categorical_entropy([0.0, 1.0, 0.0]) == 0.0

    def test_hand_computed(self):
        assert categorical_entropy([0.7, 0.3]) == pytest.approx(
            0.6108643020548935, abs=1e-9)

    def test_non_normalized_rejected(self):
        with pytest.raises(ValueError):
            categorical_entropy([0.5, 0.6])
        with pytest.raises(ValueError):
            categorical_entropy([-0.2, 1.2])

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            p = rng.dirichlet(np.ones(7))
            assert categorical_entropy(p) == categorical_entropy(p[::-1].copy())

    def test_direct_summation_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = rng.dirichlet(np.ones(5))
            expected = sum(-pi * math.log(pi) for pi in p if pi > 0)
            assert categorical_entropy(p) == pytest.approx(expected, abs=1e-12)


class TestRegEntropy:
    def test_identity(self):
        expected = 2.0 + 2.0 * math.log(2 * math.pi)
        assert reg_entropy(np.eye(4)) == pytest.approx(expected, abs=1e-12)

    def test_scaled_identity(self):
        expected = 2.0 + 2.0 * math.log(2 * math.pi) + 4.0
        assert reg_entropy(np.exp(2) * np.eye(4)) == pytest.approx(expected,
                                                                   abs=1e-9)

    def test_scaling_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            a = rng.normal(size=(4, 4))
            cov = a @ a.T + 0.5 * np.eye(4)
            for alpha in (2.0, 3.5, 10.0):
                diff = reg_entropy(alpha * cov) - reg_entropy(cov)
                assert diff == pytest.approx(2.0 * math.log(alpha), abs=1e-10)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError, match="degenerate covariance"):
            reg_entropy(np.zeros((4, 4)))
        with pytest.raises(ValueError):
            reg_entropy(np.array([[1.0, 2.0], [0.0, 1.0]]))  # not symmetric

    def test_monte_carlo_oracle(self):
        """-E[log pdf] over 1e6 draws matches the closed form (3 SE)."""
        rng = np.random.default_rng(5)
        for variances in ([1.0, 1.0, 1.0, 1.0], [0.5, 2.0, 1.5, 3.0]):
            var = np.array(variances)
            cov = np.diag(var)
            n = 1_000_000
            x = rng.standard_normal((n, 4)) * np.sqrt(var)
            log_pdf = (-0.5 * (x ** 2 / var).sum(axis=1)
                       - 0.5 * np.log(var).sum()
                       - 2.0 * np.log(2 * np.pi))
            estimate = -log_pdf.mean()
            se = log_pdf.std(ddof=1) / np.sqrt(n)
            assert abs(reg_entropy(cov) - estimate) <= 3 * se


class TestCombine:
    def test_sum_with_default_weights(self):
        cfg = AcquisitionConfig(comb="sum", w_cls=1.0, w_reg=0.01)
        assert combine(UncertaintyPair(0.5, 10.0), cfg) == pytest.approx(0.6)

    def test_max_unit_weights(self):
        cfg = AcquisitionConfig(comb="max", w_cls=1.0, w_reg=1.0)
        assert combine(UncertaintyPair(0.5, 10.0), cfg) == 10.0

    def test_cls_only(self):
        cfg = AcquisitionConfig(comb="sum", w_cls=1.0, w_reg=0.0)
        assert combine(UncertaintyPair(0.7, 123.0), cfg) == pytest.approx(0.7)

    def test_sum_linear_in_each_component(self):
        cfg = AcquisitionConfig(comb="sum", w_cls=2.0, w_reg=0.5)
        for a, b, c in [(0.1, 0.2, 0.3), (1.0, 2.0, 3.0)]:
            vals = [combine(UncertaintyPair(v, 1.0), cfg) for v in (a, b, c)]
            assert vals[1] - vals[0] == pytest.approx(vals[2] - vals[1], abs=1e-12)
            vals = [combine(UncertaintyPair(0.4, v), cfg) for v in (a, b, c)]
            assert vals[1] - vals[0] == pytest.approx(vals[2] - vals[1], abs=1e-12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AcquisitionConfig(comb="mean")
        with pytest.raises(ValueError):
            AcquisitionConfig(agg="median")
        with pytest.raises(ValueError):
            AcquisitionConfig(w_cls=-1.0)


def _det(probs, cov_scale=1.0):
    return FusedDetection(class_probs=np.asarray(probs),
                          box_mean=np.array([0, 0, 10, 10]),
                          box_cov=cov_scale * np.eye(4))


class TestScoreImage:
    def test_agg_modes_on_known_values(self):
        # build detections whose combined score is exactly u_cls (w_reg=0)
        cfg_base = dict(comb="sum", w_cls=1.0, w_reg=0.0)
        dets = [_det([p]) for p in (0.5, 0.5, 0.5)]
        h = math.log(2)
        for agg, expected in (("max", h), ("sum", 3 * h), ("avg", h)):
            cfg = AcquisitionConfig(agg=agg, **cfg_base)
            assert score_image(dets, cfg).score == pytest.approx(expected)

    def test_empty_default_zero(self):
        score = score_image([], AcquisitionConfig())
        assert score.score == 0.0
        assert score.n_detections == 0

    def test_empty_custom_score(self):
        cfg = AcquisitionConfig(empty_image_score=-3.5)
        assert score_image([], cfg).score == -3.5

    def test_singleton_agg_equivalence(self):
        det = _det([0.3, 0.6], cov_scale=2.0)
        scores = [score_image([det], AcquisitionConfig(agg=a)).score
                  for a in ("max", "sum", "avg")]
        assert scores[0] == scores[1] == scores[2]

    def test_image_id_and_count(self):
        s = score_image([_det([0.4])], AcquisitionConfig(), image_id="k7")
        assert s.image_id == "k7"
        assert s.n_detections == 1

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            ImageScore(image_id=0, score=float("nan"), n_detections=0)
