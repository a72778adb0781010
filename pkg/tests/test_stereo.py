"""Tests for block matching and the left-right consistency check."""

import numpy as np
import pytest

from core.config.settings import MatchingCost, StereoSettings
from core.errors import ConfigurationError, ShapeError
from core.stereo import (
    INVALID_DISPARITY,
    DisparityMap,
    census_transform,
    compute_disparity,
    compute_right_disparity,
    hamming,
    lr_consistency,
    match_pair,
)

HEIGHT = 40
WIDTH = 96
D_MAX = 20


def shifted_pair(d, seed=0, height=HEIGHT, width=WIDTH):
    """Random texture seen by a rectified pair with uniform disparity d."""
    big = np.random.default_rng(seed).uniform(0, 1, size=(height, width + d, 3))
    return big[:, :width], big[:, d:width + d]


def occlusion_pair(seed=1, bg_shift=2, fg_shift=8, fg_cols=(50, 75)):
    """Foreground block over a background, each with its own disparity."""
    rng = np.random.default_rng(seed)
    bg = rng.uniform(0, 1, size=(HEIGHT, WIDTH + 20, 3))
    fg = rng.uniform(0, 1, size=(HEIGHT, WIDTH + 20, 3))
    x0, x1 = fg_cols
    left = bg[:, :WIDTH].copy()
    left[:, x0:x1] = fg[:, x0:x1]
    right = bg[:, bg_shift:WIDTH + bg_shift].copy()
    right[:, x0 - fg_shift:x1 - fg_shift] = fg[:, x0:x1]
    return left, right


class TestCensus:
    """Test census codes and Hamming costs."""

    def test_constant_image_has_empty_codes(self):
        assert np.all(census_transform(np.full((10, 10), 0.5)) == 0)

    def test_hamming(self):
        a = np.array([0, 0b1011], dtype=np.uint64)
        b = np.array([(1 << 48) - 1, 0b0001], dtype=np.uint64)
        assert hamming(a, a).tolist() == [0, 0]
        assert hamming(a, b).tolist() == [48, 2]


class TestComputeDisparity:
    """Test winner-take-all matching on synthetic pairs."""

    @pytest.mark.parametrize("d", range(1, 17))
    def test_recovers_uniform_shift(self, d):
        left, right = shifted_pair(d, seed=d)
        disparity = compute_disparity(left, right, D_MAX)
        values = disparity.disparity[disparity.valid]
        assert values.size > 0.5 * (HEIGHT - 8) * (WIDTH - D_MAX - 8)
        assert np.mean(np.abs(values - d) <= 0.25) >= 0.99

    def test_zero_shift_is_exact(self):
        left, _ = shifted_pair(0)
        disparity = compute_disparity(left, left, D_MAX)
        assert disparity.valid.any()
        assert np.all(disparity.disparity[disparity.valid] == 0.0)

    def test_constant_pair_has_no_valid_pixels(self):
        flat = np.full((HEIGHT, WIDTH, 3), 0.4)
        disparity = compute_disparity(flat, flat, D_MAX)
        assert not disparity.valid.any()
        assert np.all(disparity.disparity == INVALID_DISPARITY)

    def test_border_band_invalid(self):
        left, right = shifted_pair(5)
        disparity = compute_disparity(left, right, D_MAX, window=9)
        assert not disparity.valid[:4].any()
        assert not disparity.valid[-4:].any()
        assert not disparity.valid[:, :D_MAX + 4].any()
        assert not disparity.valid[:, -4:].any()

    def test_horizontal_crop_equivariance(self):
        k = 5
        left, right = shifted_pair(7, seed=3)
        full = compute_disparity(left, right, D_MAX)
        cropped = compute_disparity(left[:, k:], right[:, k:], D_MAX)
        cols = slice(D_MAX + 8, WIDTH - k)
        both = full.valid[:, k:][:, cols] & cropped.valid[:, cols]
        assert both.any()
        np.testing.assert_allclose(cropped.disparity[:, cols][both], full.disparity[:, k:][:, cols][both],
                                   rtol=0, atol=1e-9)

    def test_deterministic(self):
        left, right = shifted_pair(6, seed=4)
        a = match_pair(left, right, D_MAX)
        b = match_pair(left, right, D_MAX)
        assert np.array_equal(a.disparity, b.disparity)
        assert np.array_equal(a.valid, b.valid)

    def test_sad_cost(self):
        left, right = shifted_pair(9, seed=5)
        disparity = compute_disparity(left, right, D_MAX, settings=StereoSettings(cost=MatchingCost.SAD))
        values = disparity.disparity[disparity.valid]
        assert np.mean(np.abs(values - 9) <= 0.25) >= 0.95

    def test_right_referenced_map(self):
        left, right = shifted_pair(6, seed=8)
        disparity = compute_right_disparity(left, right, D_MAX)
        assert not disparity.valid[:, WIDTH - D_MAX - 4:].any()
        assert not disparity.valid[:, :4].any()
        values = disparity.disparity[disparity.valid]
        assert values.size > 0
        assert np.mean(np.abs(values - 6) <= 0.25) >= 0.99

    def test_d_max_must_be_below_width(self):
        left, right = shifted_pair(2)
        with pytest.raises(ConfigurationError):
            compute_disparity(left, right, WIDTH)

    def test_even_window_rejected(self):
        left, right = shifted_pair(2)
        with pytest.raises(ConfigurationError):
            compute_disparity(left, right, D_MAX, window=8)

    def test_shape_mismatch(self):
        left, right = shifted_pair(2)
        with pytest.raises(ShapeError):
            compute_disparity(left, right[:, :-1], D_MAX)


class TestLrConsistency:
    """Test the left-right check."""

    def _constant(self, value, valid):
        return DisparityMap(disparity=np.where(valid, value, INVALID_DISPARITY), valid=valid, d_max=10)

    def test_consistent_maps_unchanged(self):
        H, W = 6, 20
        left_valid = np.zeros((H, W), bool)
        left_valid[:, 3:] = True
        right_valid = np.zeros((H, W), bool)
        right_valid[:, :W - 3] = True
        d_left = self._constant(3.0, left_valid)
        result = lr_consistency(d_left, self._constant(3.0, right_valid), tol=1.0)
        assert np.array_equal(result.valid, left_valid)

    def test_disagreeing_maps_invalidated(self):
        valid = np.ones((4, 30), bool)
        valid[:, :8] = False
        result = lr_consistency(self._constant(8.0, valid), self._constant(3.0, np.ones((4, 30), bool)))
        assert not result.valid.any()

    def test_infinite_tolerance_keeps_mask(self):
        left, right = occlusion_pair()
        d_left = compute_disparity(left, right, 16)
        d_right = compute_right_disparity(left, right, 16)
        result = lr_consistency(d_left, d_right, tol=np.inf)
        assert np.array_equal(result.valid, d_left.valid)

    def test_never_adds_pixels(self):
        left, right = shifted_pair(4, seed=6)
        d_left = compute_disparity(left, right, D_MAX)
        d_right = compute_right_disparity(left, right, D_MAX)
        result = lr_consistency(d_left, d_right)
        assert not np.any(result.valid & ~d_left.valid)

    def test_occluded_band_rejected(self):
        left, right = occlusion_pair()
        result = match_pair(left, right, 16)
        band = result.valid[4:HEIGHT - 4, 44:50]
        assert np.mean(~band) >= 0.8

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            lr_consistency(self._constant(1.0, np.ones((3, 3), bool)), self._constant(1.0, np.ones((3, 4), bool)))
