"""Transform fitting and bilinear resampling tests."""

import numpy as np
import pytest

from layercomp.imagecore import Image, MaskMap
from layercomp.warp import (
    HomographyWarp,
    SingularTransformError,
    TpsWarp,
    fit_tps,
    identity_affine,
    map_points,
    translation_affine,
    warp_from_dict,
    warp_image,
    warp_to_dict,
)


def _pixel_pitch(n: int) -> float:
    return 2.0 / (n - 1)


class TestParams:
    def test_homography_normalizes_last_entry(self):
        h = HomographyWarp(2.0 * np.eye(3))
        np.testing.assert_array_equal(h.matrix, np.eye(3))

    def test_homography_rejects_zero_last_entry(self):
        m = np.eye(3)
        m[2, 2] = 0.0
        with pytest.raises(SingularTransformError):
            HomographyWarp(m)

    def test_homography_rejects_singular(self):
        m = np.eye(3)
        m[0, 0] = 0.0
        with pytest.raises(SingularTransformError):
            HomographyWarp(m)

    def test_tps_moment_conditions_enforced(self):
        src = np.array([[-1.0, -1.0], [1.0, -1.0], [0.0, 1.0]])
        bad = np.ones((3, 2))  # columns not orthogonal to [1 | src]
        with pytest.raises(ValueError, match="moment"):
            TpsWarp(src=src, affine=np.zeros((3, 2)), weights=bad)

    def test_json_roundtrip_all_kinds(self):
        src = np.array([[-0.5, -0.5], [0.5, -0.5], [-0.5, 0.5], [0.5, 0.5]])
        params = [
            translation_affine(0.1, -0.2),
            HomographyWarp(np.array([[1, 0.1, 0], [0, 1, 0.05], [0.01, 0, 1.0]])),
            fit_tps(src, src + 0.05),
        ]
        for p in params:
            q = warp_from_dict(warp_to_dict(p))
            assert type(q) is type(p)
            pts = np.array([[0.3, -0.4], [0.0, 0.0], [-0.9, 0.7]])
            np.testing.assert_allclose(
                map_points(p, pts), map_points(q, pts), atol=1e-12
            )

    def test_from_dict_rejects_bad_docs(self):
        with pytest.raises(ValueError):
            warp_from_dict({"type": "spiral"})
        with pytest.raises(ValueError):
            warp_from_dict({"type": "affine", "m": [1, 2, 3]})


class TestFitTps:
    def test_identity_data_gives_identity_map(self):
        src = np.array([[-0.8, -0.7], [0.9, -0.6], [-0.5, 0.8], [0.7, 0.6]])
        tps = fit_tps(src, src)
        np.testing.assert_allclose(
            tps.affine, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), atol=1e-9
        )
        np.testing.assert_allclose(tps.weights, 0.0, atol=1e-9)

    def test_pure_translation_has_zero_kernel(self):
        src = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])
        tps = fit_tps(src, src + np.array([0.1, 0.2]))
        np.testing.assert_allclose(tps.weights, 0.0, atol=1e-9)
        np.testing.assert_allclose(
            tps.affine,
            np.array([[0.1, 0.2], [1.0, 0.0], [0.0, 1.0]]),
            atol=1e-9,
        )

    def test_interpolates_random_points(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            k = int(rng.integers(4, 9))
            src = _spread_points(rng, k)
            dst = src + rng.uniform(-0.2, 0.2, size=(k, 2))
            tps = fit_tps(src, dst)
            np.testing.assert_allclose(map_points(tps, src), dst, atol=1e-6)

    def test_regularization_added_to_kernel_block(self):
        rng = np.random.default_rng(4)
        src = _spread_points(rng, 6)
        dst = src + rng.uniform(-0.3, 0.3, size=(6, 2))
        exact = fit_tps(src, dst, reg=0.0)
        smooth = fit_tps(src, dst, reg=1.0)
        # with reg > 0 the fit no longer interpolates and bends less
        assert np.abs(map_points(smooth, src) - dst).max() > 1e-6
        assert np.abs(smooth.weights).sum() < np.abs(exact.weights).sum()

    def test_collinear_points_raise(self):
        src = np.array([[-1.0, 0.0], [0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])
        with pytest.raises(SingularTransformError):
            fit_tps(src, src + 0.1)

    def test_duplicate_points_raise(self):
        src = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(SingularTransformError):
            fit_tps(src, src)


def _spread_points(rng, k, min_dist=0.35):
    """Random control points with a minimum pairwise separation."""
    while True:
        pts = rng.uniform(-0.9, 0.9, size=(k, 2))
        d = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
        d[np.diag_indices(k)] = np.inf
        if d.min() > min_dist:
            return pts


class TestWarpImage:
    def test_identity_is_exact(self):
        rng = np.random.default_rng(5)
        img = Image(rng.uniform(0, 1, size=(7, 9, 3)))
        out = warp_image(img, identity_affine())
        np.testing.assert_array_equal(out.data, img.data)

    def test_identity_homography_and_scaled_copy_match(self):
        rng = np.random.default_rng(6)
        img = Image(rng.uniform(0, 1, size=(8, 8, 1)))
        out1 = warp_image(img, HomographyWarp(np.eye(3)))
        out2 = warp_image(img, HomographyWarp(2.0 * np.eye(3)))
        np.testing.assert_array_equal(out1.data, img.data)
        np.testing.assert_array_equal(out2.data, out1.data)

    def test_projective_scale_invariance(self):
        rng = np.random.default_rng(7)
        img = Image(rng.uniform(0, 1, size=(12, 12, 1)))
        base = np.array([[1.0, 0.05, 0.1], [-0.03, 0.95, 0.0], [0.02, 0.01, 1.0]])
        out1 = warp_image(img, HomographyWarp(base))
        out2 = warp_image(img, HomographyWarp(-3.7 * base))
        np.testing.assert_allclose(out1.data, out2.data, atol=1e-12)

    def test_one_pixel_shift_copies_and_zero_fills(self):
        rng = np.random.default_rng(8)
        arr = rng.uniform(0, 1, size=(5, 5))
        img = Image(arr)
        # sampling at x - pitch moves content right by one pixel
        out = warp_image(img, translation_affine(-_pixel_pitch(5), 0.0))
        np.testing.assert_array_equal(out.data[:, 1:, 0], arr[:, :-1])
        np.testing.assert_array_equal(out.data[:, 0, 0], 0.0)

    def test_half_pixel_shift_hand_case(self):
        img = Image(np.array([[0.0, 1.0, 0.0]]))
        out = warp_image(img, translation_affine(-0.5 * _pixel_pitch(3), 0.0))
        np.testing.assert_allclose(out.data[0, :, 0], [0.0, 0.5, 0.5], atol=1e-12)

    def test_mask_warps_like_image(self):
        rng = np.random.default_rng(9)
        arr = rng.uniform(0, 1, size=(6, 6))
        shift = translation_affine(-_pixel_pitch(6), 0.0)
        as_mask = warp_image(MaskMap(arr), shift)
        as_image = warp_image(Image(arr), shift)
        assert isinstance(as_mask, MaskMap)
        np.testing.assert_array_equal(as_mask.data, as_image.data[:, :, 0])

    def test_out_size_resamples(self):
        img = Image(np.linspace(0, 1, 16).reshape(4, 4))
        out = warp_image(img, identity_affine(), 8)
        assert (out.height, out.width) == (8, 8)
        # corners are fixed points of the normalized grid
        corners = [(0, 0), (0, -1), (-1, 0), (-1, -1)]
        for r, c in corners:
            assert out.data[r, c, 0] == img.data[r, c, 0]

    def test_range_preserved_under_random_warps(self):
        rng = np.random.default_rng(10)
        img = Image(rng.uniform(0, 1, size=(16, 16, 3)))
        for _ in range(20):
            m = np.eye(3) + rng.uniform(-0.2, 0.2, size=(3, 3))
            m[2, 2] = 1.0
            try:
                params = HomographyWarp(m)
            except SingularTransformError:
                continue
            out = warp_image(img, params)
            assert out.data.min() >= 0.0 and out.data.max() <= 1.0
            assert np.all(np.isfinite(out.data))

    def test_translation_roundtrip_differs_only_in_border(self):
        rng = np.random.default_rng(11)
        arr = rng.uniform(0, 1, size=(12, 12))
        img = Image(arr)
        px = 3
        t = px * _pixel_pitch(12)
        there = warp_image(img, translation_affine(-t, 0.0))
        back = warp_image(there, translation_affine(t, 0.0))
        np.testing.assert_allclose(
            back.data[:, : 12 - px, 0], arr[:, : 12 - px], atol=1e-12
        )

    def test_tps_warp_of_image_runs(self):
        rng = np.random.default_rng(12)
        img = Image(rng.uniform(0, 1, size=(10, 10, 3)))
        src = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]])
        tps = fit_tps(src, src * 0.9)
        out = warp_image(img, tps)
        assert out.data.shape == img.data.shape
        assert np.all(np.isfinite(out.data))

    def test_degenerate_homography_row_zero_fills(self):
        # maps everything onto the line at infinity except a sliver
        img = Image(np.ones((5, 5)))
        m = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 2.0, 1.0]])
        out = warp_image(img, HomographyWarp(m))
        assert np.all(np.isfinite(out.data))
        assert out.data.min() >= 0.0 and out.data.max() <= 1.0
