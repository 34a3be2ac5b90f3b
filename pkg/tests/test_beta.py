import math

import numpy as np
import pytest

from betascan.beta import (
    OptimizerSettings,
    beta_infty,
    beta_objective_at_plane,
    beta_p,
    brute_force_line_beta,
    check_lemma_2_11,
    check_lemma_2_12,
    check_lemma_2_14,
    compare_two_sets,
)
from betascan.content import PointSample, hausdorff_content
from betascan.errors import InputError
from betascan.geometry import Ball

CORNER_BETA = 1 / (2 * math.sqrt(2))  # best-line sup ratio of the |x| graph


def two_segments(r=1.0, gap=0.05, h=7e-3):
    x = np.arange(-r, r + h / 2, h)
    pts = np.concatenate([
        np.stack([x, np.full_like(x, gap / 2)], 1),
        np.stack([x, np.full_like(x, -gap / 2)], 1),
    ])
    return PointSample(pts, 1, resolution_h=h)


class TestBetaInfty:
    def test_collinear_exactly_zero(self):
        x = np.linspace(0, 1, 301)
        s = PointSample(np.stack([x, 2 * x + 0.3], 1), 1, resolution_h=4e-3)
        assert beta_infty(s, Ball([0.5, 1.3], 0.4)).value == 0.0

    def test_corner_value(self, corner_sample):
        s, _ = corner_sample
        for r in (0.5, 0.25):
            bv = beta_infty(s, Ball([0.0, 0.0], r))
            assert bv.value == pytest.approx(CORNER_BETA, rel=5e-3)

    def test_corner_against_oracle(self, corner_sample):
        s, _ = corner_sample
        ball = Ball([0.0, 0.0], 0.5)
        opt = beta_infty(s, ball).value
        oracle = brute_force_line_beta(s, ball, "sup")
        assert opt == pytest.approx(oracle, rel=1e-3)

    def test_circle_sagitta(self, circle_sample):
        s, _ = circle_sample
        for t in (0.1, 0.05):
            bv = beta_infty(s, Ball([1.0, 0.0], t))
            assert bv.value == pytest.approx(t / 4, rel=0.1)

    def test_empty_intersection_error(self, corner_sample):
        s, _ = corner_sample
        with pytest.raises(InputError):
            beta_infty(s, Ball([50.0, 50.0], 0.1))

    def test_achieving_plane_consistent(self, corner_sample):
        s, _ = corner_sample
        ball = Ball([0.0, 0.0], 0.5)
        bv = beta_infty(s, ball)
        at_plane = beta_objective_at_plane(s, ball, bv.plane)
        assert at_plane == pytest.approx(bv.value, rel=1e-12)


class TestBetaP:
    def test_coplanar_zero_for_every_p(self):
        x = np.linspace(0, 1, 201)
        s = PointSample(np.stack([x, np.zeros_like(x)], 1), 1, resolution_h=1e-2)
        for p in (1.0, 2.0, 3.0):
            assert beta_p(s, Ball([0.5, 0.0], 0.3), p=p).value == 0.0

    def test_two_segments_closed_form(self):
        # best line y=0: dist == gap/2, so beta_1 = H(E ∩ B) * gap / (2 r^2)
        s = two_segments()
        ball = Ball([0.0, 0.0], 1.0)
        bv = beta_p(s, ball, p=1.0)
        local = s.clip_to_ball(ball.center, ball.radius)
        h_val = hausdorff_content(local, 1, mesh_floor=2 * s.resolution_h, shifts=1).value
        assert bv.value == pytest.approx(h_val * 0.05 / 2, rel=1e-6)

    def test_two_segments_against_full_oracle(self):
        s = two_segments()
        ball = Ball([0.0, 0.0], 1.0)
        opt = beta_p(s, ball, p=1.0).value
        oracle = brute_force_line_beta(s, ball, "content_p", 1.0)
        assert opt == pytest.approx(oracle, rel=1e-3)

    def test_corner_scale_free(self):
        # corner beta_p is bounded below by a scale-independent constant;
        # constancy across 8 dyadic scales to 5% needs a ball-proportional
        # content mesh (the corner is exactly self-similar only then) and
        # sample resolution well below the finest scale
        from betascan.datasets import gen_synthetic

        s, _ = gen_synthetic("corner", {}, h=2e-5)
        values = []
        for j in range(8):
            r = 0.5 * 2.0**-j
            values.append(beta_p(s, Ball([0.0, 0.0], r), p=1.0, mesh_floor=r / 256).value)
        assert min(values) > 0.2
        assert max(values) - min(values) <= 0.05 * max(values)

    def test_p_validation(self, corner_sample):
        s, _ = corner_sample
        with pytest.raises(InputError):
            beta_p(s, Ball([0.0, 0.0], 0.5), p=0.5)


class TestInvariances:
    def _sample(self):
        rng = np.random.default_rng(8)
        x = np.linspace(-1, 1, 601)
        y = 0.08 * np.sin(3 * x) + 0.05 * np.sin(7 * x + 1.0)
        return PointSample(np.stack([x, y], 1), 1, resolution_h=5e-3)

    def test_dilation_invariance(self):
        s = self._sample()
        # radius incommensurate with the x-grid so no point sits exactly on
        # the ball boundary (membership would be ulp-sensitive there)
        ball = Ball([0.0, s.points[300, 1]], 0.4971)
        lam = 2.9
        s2 = PointSample(lam * s.points, 1, resolution_h=lam * s.resolution_h)
        ball2 = Ball(lam * ball.center, lam * ball.radius)
        for form, kwargs in (("sup", {}), ("p", {"p": 1.0})):
            f = beta_infty if form == "sup" else beta_p
            a = f(s, ball, **kwargs).value
            b = f(s2, ball2, **kwargs).value
            assert b == pytest.approx(a, rel=1e-3)

    def test_rigid_motion_invariance(self):
        s = self._sample()
        ball = Ball([0.0, s.points[300, 1]], 0.5)
        theta = 0.7
        rot = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
        shift = np.array([0.3, -1.2])
        s2 = PointSample(s.points @ rot.T + shift, 1, resolution_h=s.resolution_h)
        ball2 = Ball(rot @ ball.center + shift, ball.radius)
        a = beta_infty(s, ball).value
        b = beta_infty(s2, ball2).value
        assert b == pytest.approx(a, rel=1e-3)
        # the content grid is axis-aligned, so the content form is invariant
        # only up to the estimator's anisotropy
        ap = beta_p(s, ball, p=1.0).value
        bp = beta_p(s2, ball2, p=1.0).value
        assert bp == pytest.approx(ap, rel=0.30)

    def test_translation_invariance(self):
        s = self._sample()
        ball = Ball([0.0, s.points[300, 1]], 0.4971)
        shift = np.array([17.0, -4.0])
        s2 = PointSample(s.points + shift, 1, resolution_h=s.resolution_h)
        a_sup = beta_infty(s, ball).value
        b_sup = beta_infty(s2, Ball(ball.center + shift, ball.radius)).value
        assert b_sup == pytest.approx(a_sup, rel=1e-6)
        # the Choquet objective has content-jump plateaus, so ulp-level input
        # shifts can land the descent in a neighboring near-tie basin
        a = beta_p(s, ball, p=2.0).value
        b = beta_p(s2, Ball(ball.center + shift, ball.radius), p=2.0).value
        assert b == pytest.approx(a, rel=2e-2)

    def test_optimizer_sound_against_oracle(self):
        # the reported value is a true objective value, so it never undershoots
        # the grid oracle beyond the oracle's own resolution; the two-sided gap
        # is limited by the angle step at kinked minima (first-order there)
        for seed in range(4):
            rng = np.random.default_rng(seed)
            x = np.linspace(-1, 1, 401)
            y = sum(a * np.sin(b * x + c) for a, b, c in
                    zip(rng.uniform(0.02, 0.1, 3), rng.uniform(0.5, 3, 3),
                        rng.uniform(0, 6.28, 3)))
            s = PointSample(np.stack([x, y], 1), 1, resolution_h=7e-3)
            ball = Ball(s.points[200], 0.6)
            opt = beta_infty(s, ball).value
            oracle = brute_force_line_beta(s, ball, "sup")
            assert opt >= oracle * (1 - 1e-3)
            assert opt == pytest.approx(oracle, rel=5e-3)


class TestLemmaChecks:
    def test_flat_sample_zero_le_zero(self):
        x = np.linspace(-1, 1, 201)
        s = PointSample(np.stack([x, np.zeros_like(x)], 1), 1, resolution_h=1e-2)
        chk = check_lemma_2_11(s, Ball([0.0, 0.0], 0.5))
        assert chk.passed and chk.lhs == 0.0 and chk.rhs == 0.0

    def test_2_14_equal_balls_equality(self, corner_sample):
        s, _ = corner_sample
        ball = Ball([0.0, 0.0], 0.4)
        chk = check_lemma_2_14(s, ball, ball, p=1.0)
        assert chk.passed
        assert chk.lhs == pytest.approx(chk.rhs, rel=1e-9)

    def test_2_14_circle_half_ball(self, circle_sample):
        s, _ = circle_sample
        outer = Ball([1.0, 0.0], 0.2)
        inner = Ball([1.0, 0.0], 0.1)
        chk = check_lemma_2_14(s, inner, outer, p=1.0)
        assert chk.passed
        assert chk.lhs <= 4.0 * chk.rhs  # comfortable margin

    def test_2_14_containment_validation(self, circle_sample):
        s, _ = circle_sample
        with pytest.raises(InputError):
            check_lemma_2_14(s, Ball([1.0, 0.0], 0.3), Ball([1.0, 0.0], 0.2))

    def test_2_12_shallow_sine(self):
        x = np.arange(-1, 1 + 1e-3, 2e-3)
        s = PointSample(np.stack([x, 0.05 * np.sin(3 * x)], 1), 1, resolution_h=4e-3)
        chk = check_lemma_2_12(s, Ball([0.0, 0.0], 0.5), c0=0.1)
        assert chk.passed

    def test_2_12_corner(self, corner_sample):
        s, _ = corner_sample
        chk = check_lemma_2_12(s, Ball([0.0, 0.0], 0.5), c0=0.1)
        assert chk.passed

    def test_2_12_unverifiable_when_not_regular(self):
        pts = np.concatenate([np.array([[0.0, 0.0]]),
                              np.stack([np.linspace(2, 3, 300), np.zeros(300)], 1)])
        s = PointSample(pts, 1, resolution_h=1 / 299)
        chk = check_lemma_2_12(s, Ball([0.0, 0.0], 1.0), c0=0.5)
        assert chk.passed is None

    def test_compare_identical_sets(self, corner_sample):
        s, _ = corner_sample
        res = compare_two_sets(s, s, [0.0, 0.0], 0.3, p=1.0)
        assert res["error_term"] == 0.0
        assert res["beta_e1"] > 0


class TestDeterminism:
    def test_repeated_evaluation_identical(self, corner_sample):
        s, _ = corner_sample
        ball = Ball([0.0, 0.0], 0.37)
        a = beta_p(s, ball, p=2.0)
        b = beta_p(s, ball, p=2.0)
        assert a.value == b.value
        np.testing.assert_array_equal(a.plane.frame, b.plane.frame)
