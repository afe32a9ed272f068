import numpy as np
import pytest

from snippet_vo.camera import Intrinsics, warp_field
from snippet_vo.errors import DimensionMismatchError
from snippet_vo.geometry import SE3Pose, euler_to_se3, se3_compose, se3_inverse
from snippet_vo.image import bilinear
from snippet_vo.loss import (
    LossWeights,
    Snippet,
    SnippetObjective,
    SnippetPoses,
    dataset_loss,
    edge_loss,
    edge_masks,
    loss_next,
    loss_prev,
    loss_t,
    photometric_term,
    projection_transforms,
    smooth_loss,
    total_loss,
)
from snippet_vo.synthetic import SinusoidTexture, kitti_like_intrinsics, plane_snippet, random_snippet_params

K = kitti_like_intrinsics(104, 32)


def textured(rng, shape=(32, 104)):
    tex = SinusoidTexture.random(rng, amplitude=0.05, wavelength=(0.5, 1.0))
    v, u = np.mgrid[0 : shape[0], 0 : shape[1]].astype(float)
    return np.clip(tex(u / 20.0, v / 20.0), 0, 1)


def const_snippet(img, d=5.0):
    return Snippet((img, img, img), tuple(np.full(img.shape, d) for _ in range(3)))


def rendered(rng):
    prev, nxt = random_snippet_params(rng)
    P = SnippetPoses(euler_to_se3(prev), euler_to_se3(nxt))
    return plane_snippet(P, K, shape=(32, 104), seed=int(rng.integers(1 << 30))), P


class TestPhotometricTerm:
    def test_identity_is_zero_full_count(self, rng):
        img = textured(rng)
        val, n = photometric_term(img, np.full(img.shape, 3.0), img, K, SE3Pose.identity())
        assert (val, n) == (0.0, img.size)

    def test_invalid_depth(self, rng):
        img = textured(rng)
        assert photometric_term(img, np.zeros(img.shape), img, K, SE3Pose.identity()) == (0.0, 0)

    def test_one_pixel_shift(self, rng):
        big = textured(rng, (32, 106))
        src, tgt = big[:, 1:105], big[:, :104]  # tgt(u) = src(u - 1)
        d = 4.0
        val, n = photometric_term(src, np.full(src.shape, d), tgt, K, SE3Pose(np.eye(3), [d / K.fx, 0, 0]))
        assert val < 1e-6 and n == 32 * 103

    def test_mean_vs_sum(self, rng):
        a, b = textured(rng), textured(rng)
        depth = np.full(a.shape, 2.0)
        m, n = photometric_term(a, depth, b, K, SE3Pose.identity())
        s, n2 = photometric_term(a, depth, b, K, SE3Pose.identity(), reduction="sum")
        assert n == n2 and s == pytest.approx(m * n, rel=1e-12)
        assert m == pytest.approx(np.abs(a - b).mean(), rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            photometric_term(np.zeros((4, 4)), np.ones((4, 5)), np.zeros((4, 4)), K, SE3Pose.identity())


class TestTargets:
    def test_identical_frames_zero(self, rng):
        s = const_snippet(textured(rng))
        P = SnippetPoses.identity()
        assert loss_t(s, P, K) == loss_prev(s, P, K) == loss_next(s, P, K) == 0.0

    def test_loss_t_decomposes(self, rng):
        s, P = rendered(rng)
        a, _ = photometric_term(s.frames[0], s.depths[0], s.frames[1], K, P.prev_to_mid)
        b, _ = photometric_term(s.frames[2], s.depths[2], s.frames[1], K, P.next_to_mid)
        assert loss_t(s, P, K) == a + b

    def test_loss_t_positive_on_differing_mid(self, rng):
        img = textured(rng)
        s = Snippet((img, np.clip(img + 0.1, 0, 1), img), tuple(np.full(img.shape, 5.0) for _ in range(3)))
        assert loss_t(s, SnippetPoses.identity(), K) > 0.05

    def test_render_oracle_small(self, rng):
        for _ in range(3):
            s, P = rendered(rng)
            assert loss_prev(s, P, K) < 1e-3
            assert loss_next(s, P, K) < 1e-3

    def test_composed_transforms(self, rng):
        a, b = euler_to_se3(rng.normal(size=6) * 0.2), euler_to_se3(rng.normal(size=6) * 0.2)
        T = projection_transforms(a, b)
        assert np.array_equal(T["next->prev"].matrix, se3_compose(se3_inverse(a), b).matrix)
        assert np.array_equal(T["prev->next"].matrix, se3_compose(se3_inverse(b), a).matrix)
        assert np.array_equal(T["mid->prev"].matrix, se3_inverse(a).matrix)

    def test_swap_symmetry(self, rng):
        s, P = rendered(rng)
        swapped = SnippetPoses(P.next_to_mid, P.prev_to_mid)
        assert loss_t(s.swapped(), swapped, K) == pytest.approx(loss_t(s, P, K), abs=1e-15)


class TestSmoothLoss:
    def test_constant_and_ramp(self):
        u = np.arange(10.0)
        ramp = np.tile(2 * u + 1, (5, 1))
        assert smooth_loss([np.full((5, 10), 3.0)] * 3) == 0.0
        assert smooth_loss([ramp] * 3) == pytest.approx(0.0, abs=1e-12)

    def test_quadratic_row(self):
        d = (np.arange(1.0, 9.0) ** 2)[None, :]
        assert smooth_loss([d] * 3) == pytest.approx(2.0)

    def test_first_order(self):
        d = np.tile(np.arange(6.0), (3, 1))
        assert smooth_loss([d] * 3, order=1) == pytest.approx(1.0)

    def test_invalid_pixels_skipped(self):
        d = (np.arange(1.0, 9.0) ** 2)[None, :]
        d[0, 4] = 0.0
        assert smooth_loss([d] * 3) == pytest.approx(2.0)

    def test_bad_order(self):
        with pytest.raises(ValueError):
            smooth_loss([np.ones((3, 3))] * 3, order=3)


class TestEdgeLoss:
    def test_empty_masks(self, rng):
        s, P = rendered(rng)
        z = np.zeros(s.shape, bool)
        assert edge_loss(s, P, K, (z, z)) == 0.0

    def test_full_masks_equal_loss_t(self, rng):
        s, P = rendered(rng)
        o = np.ones(s.shape, bool)
        assert edge_loss(s, P, K, (o, o)) == loss_t(s, P, K)

    def test_restricted_mean_oracle(self, rng):
        s, P = rendered(rng)
        masks = edge_masks(s.frames)
        expected = 0.0
        for src, T, m in ((0, P.prev_to_mid, masks[0]), (2, P.next_to_mid, masks[2])):
            wf = warp_field(s.depths[src], K, T)
            sel = wf.valid & m
            vals = bilinear(s.frames[1], wf.u[sel], wf.v[sel])
            expected += np.abs(s.frames[src][sel] - vals).mean()
        assert edge_loss(s, P, K, (masks[0], masks[2])) == pytest.approx(expected, rel=1e-12)

    def test_step_edge_misregistration(self):
        img = np.zeros((16, 40))
        img[:, 20:] = 1.0
        Ks = Intrinsics(50.0, 50.0, 20.0, 8.0)
        s = const_snippet(img, 5.0)
        m = edge_masks(s.frames)
        aligned = edge_loss(s, SnippetPoses.identity(), Ks, (m[0], m[2]))
        shift = SE3Pose(np.eye(3), [5.0 / Ks.fx, 0, 0])
        off = edge_loss(s, SnippetPoses(shift, shift), Ks, (m[0], m[2]))
        assert aligned == 0.0 and off > 0.5


class TestTotalLoss:
    def test_breakdown_identities(self, rng):
        s, P = rendered(rng)
        b = total_loss(s, P, K, LossWeights(0.5, 20.0))
        assert b.l_intensity == pytest.approx(b.l_t + b.l_prev + b.l_next + 0.5 * b.l_smooth, abs=1e-12)
        assert b.l_final == pytest.approx(b.l_intensity + 20.0 * b.l_edge, abs=1e-12)
        assert b.l_t == pytest.approx(loss_t(s, P, K), abs=1e-15)
        assert b.l_prev == pytest.approx(loss_prev(s, P, K), abs=1e-15)
        m = edge_masks(s.frames)
        assert b.l_edge == pytest.approx(edge_loss(s, P, K, (m[0], m[2])), abs=1e-15)
        assert all(np.isfinite(v) and v >= 0 for v in (b.l_t, b.l_prev, b.l_next, b.l_smooth, b.l_edge))

    def test_zero_lambda_e(self, rng):
        s, P = rendered(rng)
        b = total_loss(s, P, K, LossWeights(0.5, 0.0))
        assert b.l_final == b.l_intensity

    def test_affine_in_lambda_e(self, rng):
        s, P = rendered(rng)
        b0 = total_loss(s, P, K, LossWeights(0.5, 0.0))
        b20 = total_loss(s, P, K, LossWeights(0.5, 20.0))
        assert abs((b20.l_final - b0.l_final) - 20 * b20.l_edge) < 1e-12

    def test_fixed_point(self, rng):
        s = const_snippet(textured(rng), 7.0)
        b = total_loss(s, SnippetPoses.identity(), K, LossWeights(3.0, 50.0))
        assert b.l_final == 0.0

    def test_edge_all_targets_option(self, rng):
        s, P = rendered(rng)
        b1 = total_loss(s, P, K, edge_all_targets=True)
        b0 = total_loss(s, P, K)
        assert b1.l_edge >= b0.l_edge
        assert set(k for k in b1.counts if k.startswith("edge:")) > set(k for k in b0.counts if k.startswith("edge:"))

    def test_deterministic(self, rng):
        s, P = rendered(rng)
        assert total_loss(s, P, K).l_final == total_loss(s, P, K).l_final

    def test_weights_validation(self):
        with pytest.raises(ValueError):
            LossWeights(-1.0, 1.0)
        with pytest.raises(ValueError):
            LossWeights(0.5, np.nan)

    def test_dataset_loss_is_mean(self, rng):
        items = [rendered(rng) for _ in range(2)]
        finals = [total_loss(s, P, K).l_final for s, P in items]
        assert dataset_loss([s for s, _ in items], [P for _, P in items], K) == pytest.approx(np.mean(finals))


def test_snippet_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        Snippet((np.zeros((3, 3)),) * 3, (np.ones((3, 3)), np.ones((3, 3)), np.ones((3, 4))))


def test_linearize_reproduces_loss(rng):
    s, P = rendered(rng)
    prev, nxt = random_snippet_params(rng)
    obj = SnippetObjective(s, K)
    r, J, c = obj.linearize(prev, nxt)
    b, _ = obj.evaluate(prev, nxt)
    assert np.sum(c * np.abs(r)) + obj.weights.lambda_s * obj.l_smooth == pytest.approx(b.l_final, rel=1e-12)
    assert J.shape == (len(r), 12)
