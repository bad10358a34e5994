import json

import numpy as np
import pytest

from refocus.classical import render_gather_uniform
from refocus.oracle import (DatasetSpec, TwoPlaneScene, aperture_points,
                            generate_dataset, generate_scene, render_oracle)
from refocus.raster import ApertureSpec, RenderParams, load_disparity, load_image


class TestAperturePoints:
    def test_inside_unit_disc(self):
        pts = aperture_points(256)
        assert pts.shape == (256, 2)
        assert np.all(pts[:, 0] ** 2 + pts[:, 1] ** 2 <= 1.0)

    def test_inside_polygon(self):
        pts = aperture_points(128, ApertureSpec(blades=3))
        apothem = np.cos(np.pi / 3)
        for a in (2 * np.pi / 3) * (np.arange(3) + 0.5):
            assert np.all(pts[:, 0] * np.cos(a) + pts[:, 1] * np.sin(a) <= apothem + 1e-12)

    def test_deterministic(self):
        np.testing.assert_array_equal(aperture_points(64), aperture_points(64))
        spec = ApertureSpec(blades=5, rotation=0.7)
        np.testing.assert_array_equal(aperture_points(99, spec), aperture_points(99, spec))


class TestRenderOracle:
    def test_zero_blur_is_composite(self, edge_scene):
        out = render_oracle(edge_scene, RenderParams(K=0, d_f=0.5), samples=16)
        np.testing.assert_allclose(out, edge_scene.composite(), atol=1e-12)

    def test_deterministic(self, edge_scene):
        p = RenderParams(K=12, d_f=0.2)
        a = render_oracle(edge_scene, p, samples=64)
        b = render_oracle(edge_scene, p, samples=64)
        assert np.array_equal(a, b)

    def test_single_plane_reduction_fg(self, rng):
        # interior comparison: the oracle clamps rays at the frame border
        # while the gather renormalizes, so the margin differs by design
        img = generate_scene(3, 48, 48).bg_color
        scene = TwoPlaneScene(img, np.zeros_like(img), np.ones((48, 48)), 0.8, 0.3)
        p = RenderParams(K=10, d_f=0.3, gamma=2.2)
        out = render_oracle(scene, p, samples=256)
        ref = render_gather_uniform(img, 5.0, 2.2)
        assert np.abs(out - ref)[6:-6, 6:-6].max() < 0.01

    def test_single_plane_reduction_bg(self, rng):
        img = generate_scene(4, 48, 48).bg_color
        scene = TwoPlaneScene(np.zeros_like(img), img, np.zeros((48, 48)), 0.8, 0.3)
        p = RenderParams(K=10, d_f=0.8, gamma=2.2)
        out = render_oracle(scene, p, samples=256)
        ref = render_gather_uniform(img, 5.0, 2.2)
        assert np.abs(out - ref)[6:-6, 6:-6].max() < 0.01

    def test_in_focus_foreground_exact(self, edge_scene):
        p = RenderParams(K=16, d_f=edge_scene.d_fg)
        out = render_oracle(edge_scene, p, samples=64)
        mask = edge_scene.fg_mask > 0.5
        np.testing.assert_allclose(out[mask], edge_scene.fg_color[mask], atol=1e-12)

    def test_convergence(self):
        scene = generate_scene(9, 48, 48)
        p = RenderParams(K=14, d_f=scene.d_bg, gamma=2.2)
        a = render_oracle(scene, p, samples=256)
        b = render_oracle(scene, p, samples=1024)
        rms = np.sqrt(np.mean((a - b) ** 2))
        assert rms < 0.005


class TestGenerateScene:
    def test_deterministic(self):
        a = generate_scene(11, 48, 48)
        b = generate_scene(11, 48, 48)
        assert np.array_equal(a.fg_color, b.fg_color)
        assert np.array_equal(a.fg_mask, b.fg_mask)
        assert a.d_fg == b.d_fg and a.d_bg == b.d_bg

    def test_coverage_and_ordering_over_seeds(self):
        for seed in range(100):
            s = generate_scene(seed, 48, 48)
            assert 0.1 <= s.fg_mask.mean() <= 0.6
            assert s.d_fg > s.d_bg
            assert s.d_fg - s.d_bg >= 0.15

    def test_small_dims_rejected(self):
        with pytest.raises(ValueError):
            generate_scene(0, 16, 16)


class TestGenerateDataset:
    def test_single_point_grid(self, tmp_path):
        spec = DatasetSpec(scene_count=1, K_grid=(12.0,), d_f_grid=(0.5,),
                           gamma_grid=(2.0,), seed=3)
        manifest = generate_dataset(spec, tmp_path, width=48, height=48, samples=16)
        scene = manifest["scenes"][0]
        assert len(scene["bokeh"]) == 1
        assert (tmp_path / scene["image"]).is_file()
        assert (tmp_path / scene["disparity"]).is_file()
        assert (tmp_path / scene["bokeh"][0]["path"]).is_file()

    def test_default_grid_counts(self, tmp_path):
        spec = DatasetSpec(scene_count=2, seed=0)
        manifest = generate_dataset(spec, tmp_path, width=48, height=48, samples=8)
        total = sum(len(s["bokeh"]) for s in manifest["scenes"])
        assert total == 2 * 2 * 20 * 5 == 400

    def test_manifest_round_trip(self, tmp_path):
        spec = DatasetSpec(scene_count=1, K_grid=(10.0,), d_f_grid=(0.2, 0.8),
                           gamma_grid=(1.0,), seed=5)
        generate_dataset(spec, tmp_path, width=48, height=48, samples=8)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        for scene in manifest["scenes"]:
            img = load_image(tmp_path / scene["image"])
            assert img.shape == (48, 48, 3)
            d = load_disparity(tmp_path / scene["disparity"])
            assert d.shape == (48, 48)
            for item in scene["bokeh"]:
                assert load_image(tmp_path / item["path"]).shape == (48, 48, 3)
