"""Tests for splat projection and front-to-back compositing."""

import numpy as np
import pytest

from core.config.settings import RenderSettings
from core.errors import TrainingStateCorruptError
from core.render import project_cloud, project_gaussian_2d, render_frame
from core.scene import Camera, GaussianCloud


def composite_oracle(cloud, cam, background, settings):
    """Per-pixel loop over projected splats, sorted by (depth, index)."""
    batch = project_cloud(cloud, cam, settings)
    H, W = cam.height, cam.width
    color = np.zeros((H, W, 3))
    raw_depth = np.zeros((H, W))
    alpha = np.zeros((H, W))
    for row in range(H):
        for col in range(W):
            hits = []
            for i in batch.visible_indices:
                x0, y0, x1, y1 = batch.bbox[i]
                if x0 <= col < x1 and y0 <= row < y1:
                    hits.append(i)
            hits.sort(key=lambda i: (batch.depths[i], i))
            T = 1.0
            c = np.zeros(3)
            d = 0.0
            for i in hits:
                if T < settings.t_stop:
                    break
                dx = col - batch.means2d[i, 0]
                dy = row - batch.means2d[i, 1]
                q = batch.conics[i]
                power = -0.5 * (q[0, 0] * dx * dx + 2.0 * q[0, 1] * dx * dy + q[1, 1] * dy * dy)
                a = min(batch.opacities[i] * np.exp(power), settings.alpha_max)
                c += a * T * batch.colors[i]
                d += a * T * batch.depths[i]
                T *= 1.0 - a
            color[row, col] = c + T * np.asarray(background)
            raw_depth[row, col] = d
            alpha[row, col] = 1.0 - T
    return color, raw_depth, alpha


def random_cloud(rng, cloud_factory, n):
    positions = np.column_stack([rng.uniform(-1, 1, n), rng.uniform(-1, 1, n), rng.uniform(2, 6, n)])
    q = rng.normal(size=(n, 4))
    return cloud_factory(
        positions,
        scales=rng.uniform(0.1, 1.0, size=(n, 3)),
        opacities=rng.uniform(0.05, 0.999, size=n),
        colors=rng.uniform(0, 1, size=(n, 3)),
        rotations=q / np.linalg.norm(q, axis=1, keepdims=True),
    )


@pytest.fixture
def small_camera():
    return Camera(fx=4.0, fy=4.0, cx=1.5, cy=1.5, width=4, height=4)


@pytest.fixture
def centre_camera():
    return Camera(fx=5.0, fy=5.0, cx=2.0, cy=2.0, width=5, height=5)


class TestProjection:
    """Test projection of single Gaussians."""

    def test_isotropic_covariance(self, cloud_factory, pinhole_camera):
        g = cloud_factory([0, 0, 5], scales=1.0)[0]
        splat = project_gaussian_2d(g, pinhole_camera)
        assert splat is not None
        assert np.allclose(splat.mean, [50, 50])
        assert splat.depth == pytest.approx(5.0)
        assert np.allclose(splat.cov, 400.3 * np.eye(2), atol=1e-9)
        assert np.allclose(splat.conic @ splat.cov, np.eye(2), atol=1e-12)

    def test_behind_camera_culled(self, cloud_factory, pinhole_camera):
        assert project_gaussian_2d(cloud_factory([0, 0, -5])[0], pinhole_camera) is None

    def test_outside_image_culled(self, cloud_factory, pinhole_camera):
        assert project_gaussian_2d(cloud_factory([100, 0, 5], scales=0.01)[0], pinhole_camera) is None

    def test_bbox_clipped_to_image(self, cloud_factory, pinhole_camera):
        batch = project_cloud(cloud_factory([0, 0, 5], scales=5.0), pinhole_camera)
        assert tuple(batch.bbox[0]) == (0, 0, 100, 100)


class TestComposite:
    """Test the forward render against hand-computed and brute-force results."""

    def test_matches_per_pixel_oracle(self, cloud_factory, small_camera):
        rng = np.random.default_rng(11)
        settings = RenderSettings()
        for _ in range(100):
            cloud = random_cloud(rng, cloud_factory, int(rng.integers(1, 6)))
            background = rng.uniform(0, 1, size=3)
            frame = render_frame(cloud, small_camera, background, settings)
            color, raw_depth, alpha = composite_oracle(cloud, small_camera, background, settings)
            np.testing.assert_allclose(frame.color, color, atol=1e-12)
            np.testing.assert_allclose(frame.raw_depth, raw_depth, atol=1e-12)
            np.testing.assert_allclose(frame.alpha, alpha, atol=1e-12)

    def test_single_splat_centre_pixel(self, cloud_factory, centre_camera):
        cloud = cloud_factory([0, 0, 5], scales=0.2, opacities=0.999, colors=[0.2, 0.4, 0.6])
        frame = render_frame(cloud, centre_camera, (1.0, 1.0, 1.0))
        assert frame.alpha[2, 2] == pytest.approx(0.99)
        assert np.allclose(frame.color[2, 2], 0.99 * np.array([0.2, 0.4, 0.6]) + 0.01)
        assert frame.depth[2, 2] == pytest.approx(5.0)

    def test_two_splats_front_to_back(self, cloud_factory, centre_camera):
        cloud = cloud_factory(
            [[0, 0, 2], [0, 0, 4]],
            scales=0.05,
            opacities=[0.5, 0.999],
            colors=[[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
        )
        frame = render_frame(cloud, centre_camera)
        assert np.allclose(frame.color[2, 2], [0.5, 0.0, 0.495])
        assert frame.alpha[2, 2] == pytest.approx(0.995)
        assert frame.depth[2, 2] == pytest.approx((1.0 + 0.495 * 4.0) / 0.995)

    def test_empty_cloud_shows_background(self, pinhole_camera):
        frame = render_frame(GaussianCloud.empty(), pinhole_camera, (0.1, 0.2, 0.3))
        assert np.all(frame.color == np.array([0.1, 0.2, 0.3]))
        assert np.all(frame.alpha == 0.0)
        assert np.all(frame.depth == 0.0)

    def test_culled_splat_leaves_background_exact(self, cloud_factory, pinhole_camera):
        frame = render_frame(cloud_factory([0, 0, -3]), pinhole_camera, (0.25, 0.5, 0.75))
        assert np.all(frame.color == np.array([0.25, 0.5, 0.75]))
        assert not frame.depth_mask().any()

    def test_order_independent(self, cloud_factory, small_camera):
        rng = np.random.default_rng(12)
        cloud = random_cloud(rng, cloud_factory, 5)
        shuffled = cloud.select(rng.permutation(5))
        a = render_frame(cloud, small_camera, (0.2, 0.2, 0.2))
        b = render_frame(shuffled, small_camera, (0.2, 0.2, 0.2))
        np.testing.assert_allclose(a.color, b.color, atol=1e-12)
        np.testing.assert_allclose(a.depth, b.depth, atol=1e-12)

    def test_adding_a_gaussian_never_lowers_alpha(self, cloud_factory, small_camera):
        rng = np.random.default_rng(13)
        for _ in range(50):
            n = int(rng.integers(1, 4))
            cloud = random_cloud(rng, cloud_factory, n)
            cloud.opacity_logits = np.minimum(cloud.opacity_logits, np.log(0.9 / 0.1))
            extra = random_cloud(rng, cloud_factory, 1)
            extra.opacity_logits = np.minimum(extra.opacity_logits, np.log(0.9 / 0.1))
            before = render_frame(cloud, small_camera).alpha
            after = render_frame(cloud.concat(extra), small_camera).alpha
            assert np.all(after >= before - 1e-12)

    def test_outputs_bounded(self, cloud_factory, small_camera):
        rng = np.random.default_rng(14)
        frame = render_frame(random_cloud(rng, cloud_factory, 5), small_camera, (1.0, 1.0, 1.0))
        assert np.all((frame.alpha >= 0) & (frame.alpha <= 1))
        assert np.all((frame.color >= 0) & (frame.color <= 1 + 1e-12))

    def test_non_finite_parameter(self, cloud_factory, pinhole_camera):
        cloud = cloud_factory([[0, 0, 5], [0, 0, 6]])
        cloud.positions[1, 0] = np.nan
        with pytest.raises(TrainingStateCorruptError):
            render_frame(cloud, pinhole_camera)
