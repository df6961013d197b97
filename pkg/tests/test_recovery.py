"""Synthetic scene generation and parameter recovery tests.

The heavyweight multi-seed recovery statistics live in the acceptance
suite; here each procedure runs on a couple of seeds.
"""

import numpy as np
import pytest

from layercomp.imagecore import Image, MaskMap
from layercomp.recovery import (
    generate_scene,
    hierarchy_gradcheck,
    filter_sweep,
    numeric_gradient,
    recover_hierarchy,
    recover_warp,
)
from layercomp.scene import Foreground, SceneSpec, compose_scene
from layercomp.warp import translation_affine


class TestGenerateScene:
    def test_same_seed_is_bit_identical(self):
        a = generate_scene(7, 3, 64)
        b = generate_scene(7, 3, 64)
        np.testing.assert_array_equal(a.gt_composite.data, b.gt_composite.data)
        assert a.gt_order_index == b.gt_order_index
        for wa, wb in zip(a.gt_warps, b.gt_warps):
            np.testing.assert_array_equal(wa.matrix, wb.matrix)

    def test_composite_matches_spec_composition(self):
        scene = generate_scene(3, 3, 64)
        again = compose_scene(scene.spec)
        np.testing.assert_allclose(
            again.image.data, scene.gt_composite.data, atol=1e-6
        )

    def test_single_object_is_alpha_composite(self):
        scene = generate_scene(11, 1, 32)
        fg = scene.spec.foregrounds[0]
        from layercomp.warp import warp_image

        wf = warp_image(fg.image, fg.warp, 32)
        wm = warp_image(fg.mask, fg.warp, 32)
        want = wf.data * wm.data[:, :, None] + scene.spec.background.data * (
            1 - wm.data[:, :, None]
        )
        np.testing.assert_allclose(scene.gt_composite.data, want, atol=1e-12)

    def test_overlap_condition_holds_for_all_pairs(self):
        scene = generate_scene(7, 3, 64)
        from layercomp.warp import warp_image

        masks = [
            warp_image(fg.mask, fg.warp, 64).data
            for fg in scene.spec.foregrounds
        ]
        areas = [m.sum() for m in masks]
        for i in range(3):
            for j in range(i + 1, 3):
                shared = (masks[i] * masks[j]).sum()
                assert shared > 0.01 * min(areas[i], areas[j])

    def test_translations_bounded(self):
        for seed in range(5):
            scene = generate_scene(seed, 2, 48)
            for w in scene.gt_warps:
                assert np.abs(w.matrix[:, 2]).max() <= 0.2

    def test_invalid_m_rejected(self):
        with pytest.raises(ValueError):
            generate_scene(0, 0, 64)
        with pytest.raises(ValueError):
            generate_scene(0, 7, 64)


class TestNumericGradient:
    def test_quadratic(self):
        g = numeric_gradient(lambda p: float(p[0] ** 2), np.array([3.0]), 1e-3)
        assert g[0] == pytest.approx(6.0, abs=1e-6)

    def test_linear_is_exact(self):
        slope = np.array([2.0, -3.0, 0.5])
        g = numeric_gradient(
            lambda p: float(slope @ p), np.array([0.3, -0.1, 4.0]), 1e-3
        )
        np.testing.assert_allclose(g, slope, atol=1e-9)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError, match="step"):
            numeric_gradient(lambda p: 0.0, np.zeros(2), 0.0)

    def test_rejects_non_finite_values(self):
        with pytest.raises(ValueError, match="non-finite"):
            numeric_gradient(lambda p: float("nan"), np.zeros(1), 1e-3)


class TestGradcheck:
    def test_analytic_matches_numeric(self):
        for seed in (1, 2):
            scene = generate_scene(seed, 2, 48)
            res = hierarchy_gradcheck(scene)
            assert res["max_rel_diff"] < 1e-4

    def test_explicit_logits_accepted(self):
        scene = generate_scene(1, 2, 48)
        res = hierarchy_gradcheck(scene, logits=np.array([0.3, -0.2]))
        assert res["max_rel_diff"] < 1e-4


class TestRecoverHierarchy:
    def test_single_object_trivial(self):
        scene = generate_scene(5, 1, 32)
        rep = recover_hierarchy(scene, steps=10, lr=0.5)
        assert rep.recovered_order_index == 0
        assert len(rep.loss_curve) == 10
        assert rep.warp_error == 0.0

    def test_two_object_scene_recovers(self):
        scene = generate_scene(8, 2, 64)
        rep = recover_hierarchy(scene, steps=300, lr=0.5)
        assert rep.recovered_order_index == scene.gt_order_index
        assert not rep.order_unidentifiable

    def test_loss_curve_non_increasing_at_small_lr(self):
        scene = generate_scene(2, 3, 64)
        rep = recover_hierarchy(scene, steps=120, lr=0.05)
        diffs = np.diff(rep.loss_curve)
        assert np.all(diffs <= 1e-15)

    def test_disjoint_masks_flagged_unidentifiable(self):
        size = 32
        rng = np.random.default_rng(54)
        m1 = np.zeros((size, size))
        m1[4:10, 4:10] = 1.0
        m2 = np.zeros((size, size))
        m2[20:28, 20:28] = 1.0
        weights = np.array([1.0, 0.0])
        spec = SceneSpec(
            background=Image(rng.uniform(0, 1, (size, size, 3))),
            foregrounds=(
                Foreground(
                    image=Image(np.full((size, size, 3), 0.9)),
                    mask=MaskMap(m1),
                    warp=translation_affine(0.0, 0.0),
                ),
                Foreground(
                    image=Image(np.full((size, size, 3), 0.1)),
                    mask=MaskMap(m2),
                    warp=translation_affine(0.0, 0.0),
                ),
            ),
            out_size=size,
            weights=weights,
        )
        comp = compose_scene(spec)
        from layercomp.recovery import ToyScene

        scene = ToyScene(
            spec=spec,
            gt_composite=comp.image,
            gt_order_index=0,
            gt_warps=tuple(fg.warp for fg in spec.foregrounds),
            seed=0,
        )
        rep = recover_hierarchy(scene, steps=200, lr=0.5)
        assert rep.order_unidentifiable
        np.testing.assert_allclose(rep.final_weights.weights, 0.5, atol=1e-3)

    def test_deterministic_reports(self):
        r1 = recover_hierarchy(generate_scene(4, 2, 48), steps=60, lr=0.5)
        r2 = recover_hierarchy(generate_scene(4, 2, 48), steps=60, lr=0.5)
        assert r1.loss_curve == r2.loss_curve
        np.testing.assert_array_equal(
            r1.final_weights.weights, r2.final_weights.weights
        )

    def test_report_json_shape(self):
        rep = recover_hierarchy(generate_scene(4, 2, 48), steps=5, lr=0.5)
        doc = rep.to_json_dict()
        assert set(doc) == {
            "steps",
            "loss_curve",
            "final_weights",
            "final_warps",
            "recovered_order_index",
            "warp_error",
            "order_unidentifiable",
        }
        assert len(doc["loss_curve"]) == 5
        assert len(doc["final_weights"]) == 2


class TestRecoverWarp:
    def test_identity_ground_truth_needs_no_steps(self):
        scene = generate_scene(6, 1, 32)
        identity = ToySceneWithIdentityWarps(scene)
        rep = recover_warp(identity, steps=0, lr=0.5)
        assert rep.warp_error < 1e-4
        assert rep.loss_curve == []

    def test_single_translation_recovered(self):
        scene = generate_scene(0, 1, 64)
        rep = recover_warp(scene, steps=250, lr=0.5)
        assert rep.warp_error < 0.01

    def test_two_translations_recovered(self):
        scene = generate_scene(1, 2, 64)
        rep = recover_warp(scene, steps=400, lr=0.5)
        assert rep.warp_error < 0.02

    def test_weights_stay_frozen(self):
        scene = generate_scene(1, 2, 48)
        rep = recover_warp(scene, steps=5, lr=0.5)
        assert rep.recovered_order_index == scene.gt_order_index
        np.testing.assert_array_equal(
            rep.final_weights.weights, scene.spec.weights
        )


def ToySceneWithIdentityWarps(scene):
    """Rebuild a scene whose ground-truth translations are zero."""
    from layercomp.recovery import ToyScene

    spec = scene.spec
    identity = translation_affine(0.0, 0.0)
    new_spec = SceneSpec(
        background=spec.background,
        foregrounds=tuple(
            Foreground(image=f.image, mask=f.mask, warp=identity)
            for f in spec.foregrounds
        ),
        out_size=spec.out_size,
        weights=spec.weights,
    )
    comp = compose_scene(new_spec)
    return ToyScene(
        spec=new_spec,
        gt_composite=comp.image,
        gt_order_index=scene.gt_order_index,
        gt_warps=tuple(identity for _ in spec.foregrounds),
        seed=scene.seed,
    )


class TestFilterSweep:
    def test_variance_non_increasing(self):
        rows = filter_sweep([1e-7, 1e-4, 1e-2, 1.0], seed=0, size=64, radius=16)
        variances = [r["variance"] for r in rows]
        assert all(b <= a for a, b in zip(variances, variances[1:]))

    def test_rows_carry_eps(self):
        rows = filter_sweep([1e-3, 1e-1], seed=1, size=32, radius=4)
        assert [r["eps"] for r in rows] == [1e-3, 1e-1]
