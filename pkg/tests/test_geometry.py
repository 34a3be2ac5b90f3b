import numpy as np
import pytest

from betascan.errors import InputError
from betascan.geometry import (
    AffinePlane,
    Ball,
    Cone,
    dist_point_plane,
    in_cone,
    local_hausdorff_distance,
    plane_local_hausdorff,
    project_plane,
)


class TestDistPointPlane:
    def test_point_on_plane(self):
        p = AffinePlane.span_axes([0.0, 0.0], [0])
        assert dist_point_plane([2.5, 0.0], p) == 0.0

    def test_axis_aligned(self):
        p = AffinePlane.span_axes([0.0, 0.0], [0])
        assert dist_point_plane([3.0, 4.0], p) == pytest.approx(4.0, abs=1e-14)

    def test_translated_axis_plane_in_r3(self):
        p = AffinePlane.span_axes([0.0, 0.0, 1.0], [0, 1], n=3)
        assert dist_point_plane([5.0, 5.0, 4.0], p) == pytest.approx(3.0, abs=1e-14)

    def test_matches_projection_residual(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            base = rng.normal(size=3)
            frame = rng.normal(size=(2, 3))
            p = AffinePlane.from_spanning(base, frame)
            x = rng.normal(size=3)
            assert dist_point_plane(x, p) == pytest.approx(
                np.linalg.norm(x - project_plane(x, p)), abs=1e-12
            )

    def test_dimension_mismatch(self):
        p = AffinePlane.span_axes([0.0, 0.0], [0])
        with pytest.raises(InputError):
            dist_point_plane([1.0, 2.0, 3.0], p)


class TestProjectPlane:
    def test_fixed_point(self):
        p = AffinePlane.span_axes([0.0, 0.0], [0])
        np.testing.assert_allclose(project_plane([7.0, 0.0], p), [7.0, 0.0])

    def test_x_axis(self):
        p = AffinePlane.span_axes([0.0, 0.0], [0])
        np.testing.assert_allclose(project_plane([3.0, 4.0], p), [3.0, 0.0])

    def test_idempotent_and_lipschitz(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            p = AffinePlane.from_spanning(rng.normal(size=4), rng.normal(size=(2, 4)))
            x, y = rng.normal(size=4), rng.normal(size=4)
            px = project_plane(x, p)
            np.testing.assert_allclose(project_plane(px, p), px, atol=1e-10)
            assert np.linalg.norm(px - project_plane(y, p)) <= np.linalg.norm(x - y) + 1e-10

    def test_residual_orthogonal_to_frame(self):
        p = AffinePlane.from_spanning([1.0, 2.0, 3.0], [[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
        x = np.array([0.3, -2.0, 5.0])
        res = x - project_plane(x, p)
        np.testing.assert_allclose(p.frame @ res, 0.0, atol=1e-12)


class TestCone:
    def test_parallel_direction_inside(self):
        c = Cone([0.0, 0.0, 0.0], [[1.0, 0.0, 0.0]], 1e-4, "toward_V")
        assert in_cone([2.0, 0.0, 0.0], c)

    def test_orthogonal_direction_outside(self):
        c = Cone([0.0, 0.0], [[1.0, 0.0]], np.pi / 2 - 1e-6, "toward_V")
        assert not in_cone([0.0, 1.0], c)

    def test_defining_inequality_numeric(self):
        # dist((1, 0.9), V=x-axis) = 0.9 < sin(pi/4) * sqrt(1.81) ~ 0.951
        c = Cone([0.0, 0.0], [[1.0, 0.0]], np.pi / 4, "toward_V")
        assert in_cone([1.0, 0.9], c)
        assert not in_cone([1.0, 1.1], c)

    def test_apex_convention(self):
        c = Cone([1.0, 1.0], [[1.0, 0.0]], 0.3, "toward_V")
        assert in_cone([1.0, 1.0], c)

    def test_dilation_invariance(self):
        rng = np.random.default_rng(2)
        c = Cone([0.5, -0.5, 0.0], rng.normal(size=(1, 3)), 0.7, "toward_V")
        for _ in range(40):
            v = rng.normal(size=3)
            x1 = c.apex + v
            x2 = c.apex + 7.3 * v
            assert in_cone(x1, c) == in_cone(x2, c)

    def test_radius_bound(self):
        c = Cone([0.0, 0.0], [[1.0, 0.0]], 0.5, "toward_V", radius=1.0)
        assert in_cone([0.5, 0.0], c)
        assert not in_cone([2.0, 0.0], c)

    def test_perp_variant(self):
        c = Cone([0.0, 0.0], [[1.0, 0.0]], np.pi / 4, "toward_V_perp")
        assert in_cone([0.0, 1.0], c)  # along V^perp
        assert not in_cone([1.0, 0.0], c)  # along V


class TestLocalHausdorff:
    def test_identical_sets(self):
        pts = np.random.default_rng(3).random((40, 2))
        assert local_hausdorff_distance(pts, pts, [0.5, 0.5], 0.4) == 0.0

    def test_parallel_lines(self):
        # two parallel dense lines at distance s: d_{x,r} = s / r; brute force
        # over dense samples of both lines is the oracle here
        s, r = 0.07, 0.5
        t = np.linspace(-2, 2, 4001)
        e = np.stack([t, np.zeros_like(t)], 1)
        f = np.stack([t, np.full_like(t, s)], 1)
        val = local_hausdorff_distance(e, f, [0.0, 0.0], r)
        assert val == pytest.approx(s / r, rel=1e-6)

    def test_one_side_empty(self):
        e = np.array([[0.0, 0.0]])
        f = np.array([[10.0, 0.0]])
        # F misses B(0, 1): only the E-side sup contributes
        val = local_hausdorff_distance(e, f, [0.0, 0.0], 1.0)
        assert val == pytest.approx(10.0, rel=1e-12)

    def test_both_empty_warns_zero(self):
        e = np.array([[5.0, 0.0]])
        f = np.array([[6.0, 0.0]])
        with pytest.warns(RuntimeWarning):
            assert local_hausdorff_distance(e, f, [0.0, 0.0], 1.0) == 0.0

    def test_symmetry_and_scaling(self):
        rng = np.random.default_rng(4)
        e = rng.random((60, 2))
        f = rng.random((50, 2))
        x = np.array([0.5, 0.5])
        r = 0.4
        a = local_hausdorff_distance(e, f, x, r)
        b = local_hausdorff_distance(f, e, x, r)
        assert a == pytest.approx(b, rel=1e-12)
        lam = 3.0
        scaled = local_hausdorff_distance(x + lam * (e - x), x + lam * (f - x), x, lam * r)
        assert scaled == pytest.approx(a, rel=1e-12)


class TestPlaneLocalHausdorff:
    def test_parallel_planes(self):
        p = AffinePlane.span_axes([0.0, 0.0], [0])
        q = AffinePlane.span_axes([0.0, 0.3], [0])
        assert plane_local_hausdorff(p, q, [0.0, 0.0], 2.0) == pytest.approx(0.15, rel=1e-9)

    def test_tilted_through_common_point(self):
        phi = 0.2
        p = AffinePlane.span_axes([0.0, 0.0], [0])
        q = AffinePlane.from_spanning([0.0, 0.0], [[np.cos(phi), np.sin(phi)]])
        val = plane_local_hausdorff(p, q, [0.0, 0.0], 1.0)
        assert val == pytest.approx(np.sin(phi), rel=0.02)

    def test_plane_missing_ball(self):
        p = AffinePlane.span_axes([0.0, 0.0], [0])
        q = AffinePlane.span_axes([0.0, 5.0], [0])
        # q misses B(0,1): only the p-side sup contributes
        assert plane_local_hausdorff(p, q, [0.0, 0.0], 1.0) == pytest.approx(5.0)


class TestConstruction:
    def test_raw_spanning_vectors_reorthonormalized(self):
        p = AffinePlane.from_spanning([0.0, 0.0, 0.0], [[2.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
        np.testing.assert_allclose(p.frame @ p.frame.T, np.eye(2), atol=1e-12)

    def test_dependent_vectors_rejected(self):
        with pytest.raises(InputError):
            AffinePlane.from_spanning([0.0, 0.0, 0.0], [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])

    def test_plane_dimension_bounds(self):
        with pytest.raises(InputError):
            AffinePlane(np.zeros(2), np.eye(2))  # d == n not allowed

    def test_ball_validation(self):
        with pytest.raises(InputError):
            Ball([0.0, 0.0], -1.0)
        with pytest.raises(InputError):
            Ball([np.inf, 0.0], 1.0)

    def test_immutability(self):
        p = AffinePlane.span_axes([0.0, 0.0], [0])
        with pytest.raises(ValueError):
            p.frame[0, 0] = 5.0
