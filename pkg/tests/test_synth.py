"""Synthetic scene generation, ground truth, and sensor noise."""

import math

import numpy as np
import pytest

from despec import errors, synth
from despec.model import WHITE
from despec.synth import (
    BUILTIN_SCENES,
    SINGLE_COLORS,
    SceneParams,
    SceneSpec,
    add_noise,
    build_scene,
    builtin_params,
    builtin_scene,
    hue_chromaticity,
    load_scene,
    render,
    save_scene,
    scene_from_text,
)


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


class TestHueChromaticity:
    def test_unit_and_nonnegative(self):
        for angle in np.linspace(0.0, 360.0, 17):
            c = hue_chromaticity(angle)
            assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-12)
            assert c.min() >= 0.0

    def test_saturation_is_orthogonal_coordinate(self):
        c = hue_chromaticity(70.0)
        parallel = float(c @ WHITE)
        ortho = np.linalg.norm(c - parallel * WHITE)
        assert ortho == pytest.approx(0.55, abs=1e-12)
        assert parallel == pytest.approx(0.8351646544245033, abs=1e-12)

    def test_angles_are_honored(self):
        a = hue_chromaticity(0.0) - 0.8351646544245033 * WHITE
        b = hue_chromaticity(90.0) - 0.8351646544245033 * WHITE
        assert float(a @ b) == pytest.approx(0.0, abs=1e-12)


class TestBuiltins:
    def test_scene_list(self):
        assert BUILTIN_SCENES == (
            "four-materials", "over-seg", "single-1", "single-2", "single-3")

    def test_unknown_scene(self):
        with pytest.raises(errors.UnknownSceneError):
            builtin_params("glossy-teapot")

    @pytest.mark.parametrize("idx", [0, 1, 2])
    def test_single_scene_colors(self, idx):
        spec = builtin_scene(f"single-{idx + 1}")
        assert len(spec.materials) == 1
        assert np.allclose(spec.materials[0], unit(SINGLE_COLORS[idx]), atol=1e-12)
        assert np.allclose(spec.materials[0], SINGLE_COLORS[idx], atol=5e-5)

    def test_four_materials_quadrant_layout(self):
        spec = builtin_scene("four-materials")
        assert (spec.width, spec.height) == (650, 450)
        assert len(spec.materials) == 4
        corners = [spec.material_map[0, 0], spec.material_map[0, -1],
                   spec.material_map[-1, 0], spec.material_map[-1, -1]]
        assert corners == [0, 1, 2, 3]

    def test_over_seg_stripe_layout(self):
        spec = builtin_scene("over-seg")
        assert len(spec.materials) == 5
        row = spec.material_map[0]
        assert row[0] == 0 and row[99] == 0 and row[100] == 1 and row[-1] == 4
        assert np.all(np.diff(row) >= 0)

    def test_size_override(self):
        spec = builtin_scene("single-1", 64, 48)
        assert (spec.width, spec.height) == (64, 48)
        assert spec.material_map.shape == (48, 64)

    def test_every_material_keeps_highlight_free_pixels(self):
        for name in BUILTIN_SCENES:
            spec = builtin_scene(name)
            for m in range(len(spec.materials)):
                mask = (spec.material_map == m) & (spec.specular_mag == 0.0)
                assert mask.any(), f"{name}: material {m} has no pure pixels"

    def test_lobes_actually_present(self):
        for name in BUILTIN_SCENES:
            assert builtin_scene(name).specular_mag.max() > 0.1


class TestRender:
    def flat_spec(self, m_d, m_s, material):
        shape = (4, 4)
        return SceneSpec(
            width=4, height=4,
            material_map=np.zeros(shape, dtype=np.int32),
            materials=[unit(material)],
            diffuse_mag=np.full(shape, m_d),
            specular_mag=np.full(shape, m_s),
            illumination=WHITE.copy(),
        )

    def test_single_pixel_composition(self):
        mat = unit([0.6667, 0.6667, 0.3333])
        gt = render(self.flat_spec(0.6, 0.2, mat))
        expected = 0.6 * mat + 0.2 * WHITE
        assert np.abs(gt.input - expected).max() <= 1e-12
        # reference triple is quoted to 4 decimals, so allow half a digit
        assert np.abs(gt.input[0, 0] - [0.5155, 0.5155, 0.3155]).max() <= 1e-4

    def test_zero_specular_scene(self):
        gt = render(self.flat_spec(0.6, 0.0, [0.7053, 0.7053, 0.0705]))
        assert np.array_equal(gt.input, gt.diffuse)
        assert np.all(gt.specular == 0.0)

    def test_additivity_is_exact(self):
        gt = render(builtin_scene("four-materials", 130, 90))
        assert np.array_equal(gt.input, gt.diffuse + gt.specular)

    def test_labels_match_map(self):
        spec = builtin_scene("over-seg", 100, 60)
        gt = render(spec)
        assert np.array_equal(gt.labels, spec.material_map)

    def test_chromaticity_mixing_identity(self):
        """Normalized pixel color must equal the diffuse chromaticity and
        illumination mixed by their magnitude shares."""
        spec = builtin_scene("four-materials", 120, 80)
        gt = render(spec)
        norm = np.linalg.norm(gt.input, axis=-1)
        chroma = gt.input / norm[..., None]
        mats = np.asarray(spec.materials)[spec.material_map]
        alpha = spec.diffuse_mag / norm
        beta = spec.specular_mag / norm
        mixed = alpha[..., None] * mats + beta[..., None] * WHITE
        assert np.abs(chroma - mixed).max() <= 1e-12

    def test_values_may_exceed_one(self):
        params = SceneParams(materials=[SINGLE_COLORS[0]],
                             diffuse_range=(1.8, 2.0), width=16, height=8)
        gt = render(build_scene(params))
        assert gt.input.max() > 1.2

    def test_tampered_map_rejected(self):
        spec = builtin_scene("single-1", 16, 8)
        spec.material_map[0, 0] = 5
        with pytest.raises(errors.InvalidSceneError):
            render(spec)

    def test_non_unit_material_rejected(self):
        spec = builtin_scene("single-1", 16, 8)
        spec.materials[0] = spec.materials[0] * 1.1
        with pytest.raises(errors.InvalidSceneError):
            render(spec)

    def test_negative_magnitude_rejected(self):
        spec = builtin_scene("single-1", 16, 8)
        spec.diffuse_mag[0, 0] = -0.1
        with pytest.raises(errors.InvalidSceneError):
            render(spec)


class TestBuildSceneValidation:
    def test_too_small(self):
        with pytest.raises(errors.InvalidSceneError):
            build_scene(SceneParams(width=3, height=3,
                                    materials=[SINGLE_COLORS[0]]))

    def test_no_materials(self):
        with pytest.raises(errors.InvalidSceneError):
            build_scene(SceneParams(materials=[]))

    def test_negative_material(self):
        with pytest.raises(errors.InvalidSceneError):
            build_scene(SceneParams(materials=[(0.5, -0.1, 0.5)]))

    def test_bad_lobe_sigma(self):
        with pytest.raises(errors.InvalidSceneError):
            build_scene(SceneParams(materials=[SINGLE_COLORS[0]],
                                    lobes=[(0.5, 0.5, 0.0, 0.4)]))

    def test_unknown_layout(self):
        with pytest.raises(errors.InvalidSceneError):
            build_scene(SceneParams(materials=[SINGLE_COLORS[0]], layout="blob"))

    def test_shading_ramp_spans_requested_range(self):
        spec = build_scene(SceneParams(materials=[SINGLE_COLORS[1]],
                                       width=33, height=8))
        assert spec.diffuse_mag[0, 0] == pytest.approx(0.45, abs=1e-12)
        assert spec.diffuse_mag[0, -1] == pytest.approx(0.75, abs=1e-12)


class TestAddNoise:
    def test_zero_sigma_is_identity_copy(self):
        gt = render(builtin_scene("single-1", 32, 24))
        noisy = add_noise(gt, 0.0)
        assert np.array_equal(noisy, gt.input)
        assert noisy is not gt.input

    def test_sample_std_matches_request(self):
        gt = render(builtin_scene("single-2", 400, 250))
        noisy = add_noise(gt, 3.0, seed=0)
        std = (noisy - gt.input).std()
        assert abs(std - 3.0 / 255.0) <= 0.05 * (3.0 / 255.0)

    def test_deterministic_per_seed(self):
        gt = render(builtin_scene("single-1", 64, 48))
        assert np.array_equal(add_noise(gt, 3.0, seed=7), add_noise(gt, 3.0, seed=7))
        assert not np.array_equal(add_noise(gt, 3.0, seed=7), add_noise(gt, 3.0, seed=8))

    def test_clips_at_zero_only(self):
        dark = SceneParams(materials=[SINGLE_COLORS[1]], width=64, height=48,
                           diffuse_range=(0.0, 0.0), lobes=[(0.5, 0.5, 0.1, 0.4)])
        noisy = add_noise(render(build_scene(dark)), 6.0, seed=0)
        assert noisy.min() == 0.0
        assert (noisy == 0.0).sum() > 0

    def test_leaves_hdr_values_unclipped(self):
        params = SceneParams(materials=[SINGLE_COLORS[0]], width=64, height=48,
                             diffuse_range=(1.8, 2.0))
        noisy = add_noise(render(build_scene(params)), 3.0, seed=0)
        assert noisy.max() > 1.2

    def test_negative_sigma_rejected(self):
        gt = render(builtin_scene("single-1", 16, 8))
        with pytest.raises(errors.InvalidSceneError):
            add_noise(gt, -1.0)


class TestSceneText:
    def test_round_trip_preserves_render(self):
        params = builtin_params("four-materials", 64, 48)
        parsed = scene_from_text(params.to_text())
        a = render(build_scene(params))
        b = render(build_scene(parsed))
        assert np.allclose(a.input, b.input, atol=1e-9)
        assert np.array_equal(a.labels, b.labels)

    def test_save_and_load(self, tmp_path):
        params = builtin_params("single-3", 48, 32)
        path = tmp_path / "scene.txt"
        save_scene(params, path)
        loaded = load_scene(path)
        assert loaded.width == 48 and loaded.height == 32
        assert np.allclose(loaded.materials, params.materials, atol=1e-9)

    def test_custom_scene(self):
        text = """
        # two stripes, one highlight
        scene = custom
        width = 40
        height = 24
        layout = stripes
        material = 0.6667 0.6667 0.3333
        material = 0.7053, 0.7053, 0.0705
        lobe = 0.5 0.5 0.1 0.3
        """
        params = scene_from_text(text)
        assert params.width == 40 and params.height == 24
        assert len(params.materials) == 2
        assert params.materials[1] == (0.7053, 0.7053, 0.0705)
        spec = build_scene(params)
        assert spec.material_map.max() == 1

    def test_builtin_base_with_overrides(self):
        params = scene_from_text("scene = single-2\nwidth = 64\n")
        assert params.width == 64
        assert params.height == 240  # untouched default of the base scene
        assert params.materials == [SINGLE_COLORS[1]]

    def test_unknown_base_scene(self):
        with pytest.raises(errors.UnknownSceneError):
            scene_from_text("scene = nope\nmaterial = 1 1 1\n")

    @pytest.mark.parametrize("text", [
        "scene = custom\nfoo = 1\nmaterial = 1 1 1\n",
        "scene = custom\nlayout = spiral\nmaterial = 1 1 1\n",
        "scene = custom\n",                          # no materials
        "scene = custom\nmaterial = a b c\n",        # bad number
        "scene = custom\nmaterial = 1 1\n",          # wrong arity
        "scene = custom\nwidth = ten\nmaterial = 1 1 1\n",
        "just some words\n",                         # no key = value shape
    ])
    def test_bad_descriptions(self, text):
        with pytest.raises(errors.InvalidSceneError):
            scene_from_text(text)

    def test_text_is_commented_key_value(self):
        text = builtin_params("single-1").to_text()
        assert text.startswith("#")
        assert "scene = single-1" in text
        assert "material = " in text
