"""Tests for the loss functions and their analytic gradients."""

import math

import numpy as np
import pytest

from conftest import central_difference, chain_graph, gradient_gap, graph_from_edges
from trailer_walk.numerics import (
    ContrastiveBatch,
    LossReport,
    bidaf_fuse,
    bidaf_fuse_grad,
    cpc_walk_representation,
    info_nce,
    joint_loss,
    kl_prediction_consistency,
    kl_teacher,
    nce_representation,
)

GRAD_TOL = 1e-4


def _fuse_scalar(t, a, v, gt, ga, gv):
    t2, a2, v2 = bidaf_fuse(t, a, v)
    return float((gt * t2).sum() + (ga * a2).sum() + (gv * v2).sum())


class TestBidafFuse:
    def test_zero_modalities_pass_text_through(self):
        rng = np.random.default_rng(0)
        t = rng.normal(size=(3, 4))
        zero = np.zeros((3, 4))
        t2, a2, v2 = bidaf_fuse(t, zero, zero)
        assert np.array_equal(t2, t)

    def test_single_position_reduces_to_sum(self):
        rng = np.random.default_rng(1)
        t, a, v = (rng.normal(size=(1, 5)) for _ in range(3))
        t2, _, _ = bidaf_fuse(t, a, v)
        assert np.allclose(t2, t + a + v, atol=1e-12)

    def test_matches_loop_reference(self):
        rng = np.random.default_rng(2)
        t, a, v = (rng.normal(size=(3, 4)) for _ in range(3))

        def attend_ref(x, y):
            out = np.zeros_like(x)
            for i in range(x.shape[0]):
                scores = [sum(x[i, d] * y[j, d] for d in range(x.shape[1])) for j in range(y.shape[0])]
                mx = max(scores)
                ws = [math.exp(s - mx) for s in scores]
                z = sum(ws)
                for j in range(y.shape[0]):
                    out[i] += (ws[j] / z) * y[j]
            return out

        t2, a2, v2 = bidaf_fuse(t, a, v)
        assert np.allclose(t2, attend_ref(t, a) + attend_ref(t, v) + t, atol=1e-12)
        assert np.allclose(a2, attend_ref(a, t) + attend_ref(a, v) + a, atol=1e-12)
        assert np.allclose(v2, attend_ref(v, t) + attend_ref(v, a) + v, atol=1e-12)

    def test_output_shapes_match_inputs(self):
        rng = np.random.default_rng(3)
        mats = [rng.normal(size=(6, 3)) for _ in range(3)]
        for out, inp in zip(bidaf_fuse(*mats), mats):
            assert out.shape == inp.shape

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            bidaf_fuse(np.zeros((3, 4)), np.zeros((2, 4)), np.zeros((3, 4)))

    def test_gradients_match_finite_differences(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            t, a, v = (rng.normal(size=(3, 4)) for _ in range(3))
            gt, ga, gv = (rng.normal(size=(3, 4)) for _ in range(3))
            rep = bidaf_fuse_grad(t, a, v, gt, ga, gv)
            assert rep.value == pytest.approx(_fuse_scalar(t, a, v, gt, ga, gv))
            for name, x in (("text", t), ("audio", a), ("video", v)):
                others = {"text": t, "audio": a, "video": v}

                def f(x2, _name=name):
                    args = dict(others)
                    args[_name] = x2
                    return _fuse_scalar(args["text"], args["audio"], args["video"], gt, ga, gv)

                num = central_difference(f, x)
                assert gradient_gap(rep.gradients[name], num) <= GRAD_TOL


def _spread_rows(rng, shape, lo=0.1, hi=1.0):
    """Rows of distinct well-separated positives (keeps max-pools stable)."""
    return np.stack([rng.permutation(np.linspace(lo, hi, shape[1])) for _ in range(shape[0])])


class TestPredictionConsistency:
    def test_identity_pooling_equal_distributions(self):
        q = np.array([[0.25, 0.25, 0.5], [0.1, 0.6, 0.3]])
        rep = kl_prediction_consistency(q, q, [0, 1, 2])
        assert rep.value == pytest.approx(0.0, abs=1e-12)
        assert np.allclose(rep.gradients["shot_probs"], 0.0, atol=1e-12)

    def test_two_class_hand_value(self):
        rep = kl_prediction_consistency([[0.5, 0.5]], [[0.25, 0.75]], [0, 1])
        expected = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
        assert rep.value == pytest.approx(expected, abs=1e-9)

    def test_max_pool_then_renormalize(self):
        rep = kl_prediction_consistency([[0.2, 0.6, 0.9]], [[0.5, 0.5]], [0, 0, 1])
        pooled = np.array([0.6, 0.9])
        pbar = pooled / pooled.sum()
        expected = sum(pbar[i] * math.log(pbar[i] / 0.5) for i in range(2))
        assert rep.value == pytest.approx(expected, abs=1e-12)

    def test_support_violation_raises_unless_smoothed(self):
        with pytest.raises(ValueError, match="zero mass"):
            kl_prediction_consistency([[0.5, 0.5]], [[0.0, 1.0]], [0, 1])
        rep = kl_prediction_consistency([[0.5, 0.5]], [[0.0, 1.0]], [0, 1], smoothing=1e-8)
        assert np.isfinite(rep.value)

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(ValueError, match="sums to zero"):
            kl_prediction_consistency([[0.0, 0.0]], [[0.5, 0.5]], [0, 1])
        with pytest.raises(ValueError, match="no shots"):
            kl_prediction_consistency([[0.3, 0.7]], [[0.5, 0.5]], [0, 0])
        with pytest.raises(ValueError):
            kl_prediction_consistency([[0.3, 0.7]], [[0.5, 0.5]], [0])
        with pytest.raises(ValueError):
            kl_prediction_consistency([[0.3, -0.7]], [[0.5, 0.5]], [0, 1])

    def test_gradient_matches_finite_differences(self):
        mapping = [0, 0, 1, 1, 1, 2, 2, 2]
        for seed in range(6):
            rng = np.random.default_rng(seed)
            shot_probs = _spread_rows(rng, (3, 8))
            q = rng.uniform(0.1, 1.0, size=(3, 3))
            q = q / q.sum(axis=1, keepdims=True)
            rep = kl_prediction_consistency(shot_probs, q, mapping)
            num = central_difference(
                lambda sp: kl_prediction_consistency(sp, q, mapping).value, shot_probs
            )
            assert gradient_gap(rep.gradients["shot_probs"], num) <= GRAD_TOL

    def test_value_non_negative(self):
        mapping = [0, 1, 2, 3]
        for seed in range(10):
            rng = np.random.default_rng(seed)
            p = rng.uniform(0.05, 1.0, size=(2, 4))
            q = rng.uniform(0.05, 1.0, size=(2, 4))
            q = q / q.sum(axis=1, keepdims=True)
            assert kl_prediction_consistency(p, q, mapping).value >= -1e-12


class TestNceRepresentation:
    def test_equal_similarities_give_log_n(self):
        row = np.array([0.3, -1.2, 0.5])
        reps = np.tile(row, (5, 1))
        rep = nce_representation(reps, reps, temperature=0.7)
        assert rep.value == pytest.approx(math.log(5), abs=1e-9)

    def test_saturated_pairs_approach_zero(self):
        shot = np.array([[1.0], [-1.0]])
        scene = np.array([[10.0], [-10.0]])
        rep = nce_representation(scene, shot, temperature=1.0)
        assert 0.0 <= rep.value < 1e-8

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(4)
        shot = rng.normal(size=(6, 4))
        scene = rng.normal(size=(6, 4))
        perm = rng.permutation(6)
        a = nce_representation(scene, shot, temperature=0.5)
        b = nce_representation(scene[perm], shot[perm], temperature=0.5)
        assert a.value == pytest.approx(b.value, abs=1e-12)

    def test_gradients_match_finite_differences(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            shot = rng.normal(size=(4, 3))
            scene = rng.normal(size=(4, 3))
            rep = nce_representation(scene, shot, temperature=0.8)
            num_shot = central_difference(
                lambda h: nce_representation(scene, h, temperature=0.8).value, shot
            )
            num_scene = central_difference(
                lambda s: nce_representation(s, shot, temperature=0.8).value, scene
            )
            assert gradient_gap(rep.gradients["shot_reps"], num_shot) <= GRAD_TOL
            assert gradient_gap(rep.gradients["scene_reps"], num_scene) <= GRAD_TOL

    def test_rejects_bad_batches(self):
        one = np.ones((1, 3))
        two = np.ones((2, 3))
        with pytest.raises(ValueError):
            nce_representation(one, one, temperature=1.0)
        with pytest.raises(ValueError):
            nce_representation(two, two, temperature=0.0)
        with pytest.raises(ValueError):
            ContrastiveBatch(anchors=two, positives=np.ones((2, 4)), temperature=1.0)


class TestInfoNce:
    def test_equal_similarities_give_log_k_plus_one(self):
        rng = np.random.default_rng(5)
        anchor = rng.normal(size=4)
        c = rng.normal(size=4)
        rep = info_nce(anchor, c, np.tile(c, (3, 1)), temperature=0.9)
        assert rep.value == pytest.approx(math.log(4), abs=1e-9)

    def test_dominant_positive_drives_loss_to_zero(self):
        rep = info_nce([2.0], [20.0], [[-20.0]], temperature=1.0)
        assert 0.0 <= rep.value < 1e-9

    def test_gradients_match_finite_differences(self):
        for seed in range(8):
            rng = np.random.default_rng(seed)
            anchor = rng.normal(size=5)
            pos = rng.normal(size=5)
            negs = rng.normal(size=(3, 5))
            rep = info_nce(anchor, pos, negs, temperature=0.6)
            checks = (
                ("anchor", anchor, lambda x: info_nce(x, pos, negs, temperature=0.6).value),
                ("positive", pos, lambda x: info_nce(anchor, x, negs, temperature=0.6).value),
                ("negatives", negs, lambda x: info_nce(anchor, pos, x, temperature=0.6).value),
            )
            for name, x, f in checks:
                assert gradient_gap(rep.gradients[name], central_difference(f, x)) <= GRAD_TOL

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            info_nce([1.0], [1.0], np.zeros((0, 1)), temperature=1.0)
        with pytest.raises(ValueError):
            info_nce([1.0], [1.0], [[1.0]], temperature=-1.0)
        with pytest.raises(ValueError):
            info_nce([1.0, 2.0], [1.0], [[1.0, 2.0]], temperature=1.0)


def _random_rows(rng, shape):
    m = rng.uniform(0.05, 1.0, size=shape)
    return m / m.sum(axis=1, keepdims=True)


class TestKlTeacher:
    def test_equal_distributions_give_zero(self):
        p = _random_rows(np.random.default_rng(6), (3, 5))
        rep = kl_teacher(p, p)
        assert rep.value == pytest.approx(0.0, abs=1e-12)

    def test_additive_over_turning_points(self):
        rng = np.random.default_rng(7)
        p1 = _random_rows(rng, (1, 4))
        q1 = _random_rows(rng, (1, 4))
        single = kl_teacher(p1, q1).value
        stacked = kl_teacher(np.tile(p1, (5, 1)), np.tile(q1, (5, 1))).value
        assert stacked == pytest.approx(5 * single, abs=1e-12)

    def test_matches_brute_force_sum(self):
        rng = np.random.default_rng(8)
        p = _random_rows(rng, (5, 8))
        q = _random_rows(rng, (5, 8))
        expected = sum(
            p[t, i] * math.log(p[t, i] / q[t, i]) for t in range(5) for i in range(8)
        )
        assert kl_teacher(p, q).value == pytest.approx(expected, abs=1e-12)

    def test_value_positive_when_distributions_differ(self):
        p = np.array([[0.4, 0.6]])
        q = np.array([[0.6, 0.4]])
        assert kl_teacher(p, q).value > 1e-3

    def test_row_sum_and_support_validation(self):
        with pytest.raises(ValueError, match="sum to 1"):
            kl_teacher([[0.4, 0.4]], [[0.5, 0.5]])
        with pytest.raises(ValueError, match="zero mass"):
            kl_teacher([[0.5, 0.5]], [[1.0, 0.0]])
        rep = kl_teacher([[0.5, 0.5]], [[1.0, 0.0]], smoothing=1e-8)
        assert np.isfinite(rep.value)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        p = _random_rows(rng, (4, 6))
        q = _random_rows(rng, (4, 6))
        rep = kl_teacher(p, q)
        num = central_difference(lambda x: kl_teacher(x, q).value, p)
        assert gradient_gap(rep.gradients["model_probs"], num) <= GRAD_TOL


class TestJointLoss:
    def test_fixtures(self):
        assert joint_loss(0, 0, 0, 0) == 0.0
        assert joint_loss(1, 1, 1, 1) == pytest.approx(12.03, abs=1e-9)
        assert joint_loss(2, 3, 0, 0, consistency_weight=123, representation_weight=9) == 5.0

    def test_linear_in_each_term(self):
        rng = np.random.default_rng(10)
        s, v, p, r = rng.normal(size=4)
        combined = joint_loss(s, v, p, r)
        basis = (
            s * joint_loss(1, 0, 0, 0)
            + v * joint_loss(0, 1, 0, 0)
            + p * joint_loss(0, 0, 1, 0)
            + r * joint_loss(0, 0, 0, 1)
        )
        assert combined == pytest.approx(basis, abs=1e-9)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            joint_loss(float("nan"), 0, 0, 0)


class TestCpcWalk:
    def test_zero_steps_returns_anchor_rep(self):
        g = chain_graph(4)
        reps = np.arange(8.0).reshape(4, 2)
        assert np.array_equal(cpc_walk_representation(g, reps, 1, steps=0), reps[1])

    def test_chain_walk_means_along_path(self):
        g = chain_graph(5)
        reps = np.arange(10.0).reshape(5, 2)
        got = cpc_walk_representation(g, reps, 0, steps=2)
        assert np.allclose(got, reps[:3].mean(axis=0))

    def test_terminal_anchor_keeps_own_rep(self):
        g = chain_graph(3)
        reps = np.arange(6.0).reshape(3, 2)
        assert np.array_equal(cpc_walk_representation(g, reps, 2, steps=3), reps[2])

    def test_dead_end_stops_early(self):
        g = chain_graph(3)
        reps = np.arange(6.0).reshape(3, 2)
        got = cpc_walk_representation(g, reps, 0, steps=10)
        assert np.allclose(got, reps.mean(axis=0))

    def test_tie_goes_to_smaller_shot(self):
        g = graph_from_edges(3, {0: [(1, 0.5), (2, 0.5)]})
        reps = np.array([[0.0], [2.0], [10.0]])
        got = cpc_walk_representation(g, reps, 0, steps=1)
        assert np.allclose(got, [1.0])

    def test_default_walk_length_is_three_hops(self):
        g = chain_graph(8)
        reps = np.arange(8.0).reshape(8, 1)
        assert np.allclose(cpc_walk_representation(g, reps, 0), reps[:4].mean(axis=0))

    def test_rejects_bad_inputs(self):
        g = chain_graph(3)
        reps = np.zeros((3, 2))
        with pytest.raises(ValueError):
            cpc_walk_representation(g, reps, 5)
        with pytest.raises(ValueError):
            cpc_walk_representation(g, reps, 0, steps=-1)
        with pytest.raises(ValueError):
            cpc_walk_representation(g, np.zeros((4, 2)), 0)

    def test_loss_report_requires_finite_value(self):
        with pytest.raises(ValueError):
            LossReport(value=float("inf"), gradients={})
