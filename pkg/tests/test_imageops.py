import math

import numpy as np
import pytest

from avjigsaw.imageops import budget_dims, rescale_to_budget, resize_bilinear, to_grayscale

BUDGET = 100352
PATCH = 28


class TestBudgetDims:
    def test_exact_budget_and_aligned_unchanged(self):
        # 448 * 224 == 100,352 and both are multiples of 28
        assert 448 * 224 == BUDGET
        assert budget_dims(448, 224, BUDGET, PATCH) == (448, 224)

    def test_hd_frame_shrinks_inside_budget(self):
        # hand check: scale = sqrt(100352 / 921600), dims floored to patch grid
        scale = math.sqrt(BUDGET / (1280 * 720))
        expect_w = int(1280 * scale / PATCH) * PATCH
        expect_h = int(720 * scale / PATCH) * PATCH
        assert (expect_w, expect_h) == (420, 224)
        assert budget_dims(1280, 720, BUDGET, PATCH) == (420, 224)
        assert 420 * 224 <= BUDGET

    def test_small_frame_rounds_down_no_upscale(self):
        assert budget_dims(100, 100, BUDGET, PATCH) == (84, 84)

    def test_floor_at_one_patch(self):
        assert budget_dims(20, 300, BUDGET, PATCH) == (28, 280)

    @pytest.mark.parametrize("w,h", [(640, 360), (1920, 1080), (320, 240), (448, 448)])
    def test_budget_and_alignment_always_hold(self, w, h):
        out_w, out_h = budget_dims(w, h, BUDGET, PATCH)
        assert out_w % PATCH == 0 and out_h % PATCH == 0
        assert out_w * out_h <= BUDGET


class TestGrayscale:
    def test_bt601_weights(self):
        frame = np.zeros((2, 2, 3), np.uint8)
        frame[..., 0] = 100  # red only
        gray = to_grayscale(frame)
        assert np.allclose(gray, 29.9)

    def test_uniform_offset_preserved(self):
        base = np.full((4, 4, 3), 50, np.uint8)
        assert np.allclose(to_grayscale(base + 10) - to_grayscale(base), 10.0, atol=1e-9)


class TestResize:
    def test_constant_image_stays_constant(self):
        img = np.full((10, 17), 42.0)
        out = resize_bilinear(img, 64, 64)
        assert np.allclose(out, 42.0)

    def test_identity_size(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 255, (8, 8))
        out = resize_bilinear(img, 8, 8)
        assert np.allclose(out, img)

    def test_downscale_averages_locally(self):
        # left half 0, right half 100: downscaled row keeps the step ordering
        img = np.concatenate([np.zeros((4, 8)), np.full((4, 8), 100.0)], axis=1)
        out = resize_bilinear(img, 2, 4)
        assert out[0, 0] < out[0, -1]
        assert np.all(np.diff(out[0]) >= 0)


class TestRescaleStack:
    def test_stack_rescaled_and_dtype_kept(self):
        frames = np.random.default_rng(0).integers(0, 255, (3, 100, 100, 3)).astype(np.uint8)
        out = rescale_to_budget(frames, BUDGET, PATCH)
        assert out.shape == (3, 84, 84, 3)
        assert out.dtype == np.uint8

    def test_empty_stack_passthrough(self):
        frames = np.zeros((0, 0, 0, 3), np.uint8)
        assert rescale_to_budget(frames, BUDGET, PATCH) is frames
