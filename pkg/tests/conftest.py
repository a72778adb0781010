"""Pytest configuration and fixtures for testing."""

import logging

import numpy as np
import pytest

from core.config.settings import TrainConfig
from core.io.synth import gen_synth_scene, two_plane_spec
from core.scene.camera import Camera
from core.scene.gaussians import GaussianCloud, inverse_sigmoid, sh_coeff_count
from core.scene.sh import rgb_to_sh_dc


def make_cloud(positions, scales=0.1, opacities=0.5, colors=0.5, rotations=None, sh_degree=0):
    """Cloud from plain values; scalars broadcast over every Gaussian."""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    n = positions.shape[0]
    scales = np.broadcast_to(np.asarray(scales, dtype=np.float64).reshape(-1, 1) if np.ndim(scales) == 1
                             else np.asarray(scales, dtype=np.float64), (n, 3))
    opacities = np.broadcast_to(np.asarray(opacities, dtype=np.float64), (n,))
    colors = np.broadcast_to(np.asarray(colors, dtype=np.float64), (n, 3))
    if rotations is None:
        rotations = np.tile([1.0, 0.0, 0.0, 0.0], (n, 1))
    sh = np.zeros((n, sh_coeff_count(sh_degree), 3))
    sh[:, 0, :] = rgb_to_sh_dc(colors)
    return GaussianCloud(
        positions=positions,
        rotations=np.asarray(rotations, dtype=np.float64),
        log_scales=np.log(scales),
        opacity_logits=inverse_sigmoid(opacities),
        sh_coeffs=sh,
        sh_degree=sh_degree,
    )


@pytest.fixture
def cloud_factory():
    """Provide the make_cloud helper."""
    return make_cloud


@pytest.fixture
def pinhole_camera():
    """100x100 camera at the origin looking along +z, fx = fy = 100."""
    return Camera(fx=100.0, fy=100.0, cx=50.0, cy=50.0, width=100, height=100)


@pytest.fixture
def stereo_camera():
    """64x48 camera at the origin, fx = fy = 100."""
    return Camera(fx=100.0, fy=100.0, cx=31.5, cy=23.5, width=64, height=48)


@pytest.fixture(scope="session")
def textured_plane_cloud():
    """Dense opaque Gaussians with random colors tiling the plane z = 5."""
    rng = np.random.default_rng(0)
    xs = np.arange(-1.8, 1.9, 0.05)
    ys = np.arange(-1.35, 1.36, 0.05)
    gx, gy = np.meshgrid(xs, ys)
    positions = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, 5.0)], axis=1)
    colors = rng.uniform(0.05, 0.95, size=(len(positions), 3))
    return make_cloud(positions, scales=0.035, opacities=0.95, colors=colors)


@pytest.fixture(scope="session")
def tiny_scene_spec():
    """Two-plane scene scaled down to six 24x18 views."""
    return two_plane_spec(train_views=5, test_views=1, image_size=(24, 18), seed=0)


@pytest.fixture(scope="session")
def tiny_scene(tiny_scene_spec):
    """Materialized tiny two-plane dataset."""
    return gen_synth_scene(tiny_scene_spec)


@pytest.fixture
def fast_config():
    """A short schedule that still reaches depth supervision and densification."""
    return TrainConfig(
        iterations=30,
        depth_start=15,
        refresh_interval=5,
        densify_from=5,
        densify_until=25,
        densify_interval=10,
    )


@pytest.fixture
def restore_logging():
    """Put the root logger back the way the test found it."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers[:]:
        if handler not in handlers:
            root.removeHandler(handler)
            handler.close()
    for handler in handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    root.setLevel(level)
