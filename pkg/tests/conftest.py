import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def rand_image(rng):
    return rng.uniform(0.0, 1.0, (48, 64, 3))


def scene_with_gap(min_gap, width=96, height=96, start_seed=0):
    """First generated scene whose disparity separation reaches min_gap."""
    from refocus.oracle import generate_scene

    seed = start_seed
    while True:
        scene = generate_scene(seed, width, height)
        if scene.d_fg - scene.d_bg >= min_gap:
            return scene
        seed += 1


@pytest.fixture
def edge_scene():
    """Constant-color two-plane scene with a vertical depth edge."""
    from refocus.oracle import TwoPlaneScene

    h = w = 64
    fg = np.full((h, w, 3), 0.9)
    bg = np.full((h, w, 3), 0.1)
    mask = np.zeros((h, w))
    mask[:, : w // 2] = 1.0
    return TwoPlaneScene(fg, bg, mask, d_fg=0.7, d_bg=0.2)
