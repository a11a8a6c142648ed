"""Padding, convolution and unfold/fold tests"""
import sys
import os
import unittest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

import numpy as np
from tensorcore import (ConvSpec, GeometryError, PaddingMode, PatchMatrix, conv2d,
                        fold, identity_spec, overlap_count, pad, unfold)


def ones_conv(K=3, dilation=1, padding=PaddingMode.ZERO):
    return ConvSpec(weights=np.ones((1, 1, K, K)), dilation=dilation, padding=padding)


class TestPad(unittest.TestCase):
    """Border modes"""

    def test_zero_pad_single_cell(self):
        out = pad(np.full((1, 1, 1, 1), 5.0), PaddingMode.ZERO, 1)
        expected = np.zeros((1, 1, 3, 3))
        expected[0, 0, 1, 1] = 5.0
        np.testing.assert_array_equal(out, expected)

    def test_circular_wraps(self):
        F = np.array([1.0, 2.0, 3.0]).reshape(1, 1, 1, 3)
        out = pad(F, PaddingMode.CIRCULAR, (0, 1))
        np.testing.assert_array_equal(out[0, 0, 0], [3, 1, 2, 3, 1])

    def test_replicate_repeats_edge(self):
        F = np.array([1.0, 2.0, 3.0]).reshape(1, 1, 1, 3)
        out = pad(F, PaddingMode.REPLICATE, (0, 1))
        np.testing.assert_array_equal(out[0, 0, 0], [1, 1, 2, 3, 3])

    def test_interior_preserved(self):
        F = np.random.default_rng(0).standard_normal((2, 3, 5, 6))
        for mode in PaddingMode:
            out = pad(F, mode, 2)
            self.assertEqual(out.shape, (2, 3, 9, 10))
            np.testing.assert_array_equal(out[:, :, 2:-2, 2:-2], F, f"{mode.value} interior")

    def test_reflect_too_large(self):
        with self.assertRaises(ValueError):
            pad(np.ones((1, 1, 3, 3)), PaddingMode.REFLECT, 3)

    def test_circular_too_large(self):
        pad(np.ones((1, 1, 3, 3)), PaddingMode.CIRCULAR, 3)
        with self.assertRaises(ValueError):
            pad(np.ones((1, 1, 3, 3)), PaddingMode.CIRCULAR, 4)

    def test_parse(self):
        self.assertIs(PaddingMode.parse("Circular"), PaddingMode.CIRCULAR)
        with self.assertRaises(ValueError):
            PaddingMode.parse("mirror")

    def test_rejects_bad_rank_and_nan(self):
        with self.assertRaises(ValueError):
            pad(np.ones((3, 3)), PaddingMode.ZERO, 1)
        F = np.ones((1, 1, 2, 2))
        F[0, 0, 0, 0] = np.nan
        with self.assertRaises(ValueError):
            pad(F, PaddingMode.ZERO, 1)


class TestConv2d(unittest.TestCase):
    """Stride-1 same convolution"""

    def test_identity_kernel(self):
        F = np.random.default_rng(1).standard_normal((2, 3, 6, 5))
        for mode in PaddingMode:
            out = conv2d(F, identity_spec(3, padding=mode))
            np.testing.assert_allclose(out, F, atol=1e-12)

    def test_all_ones_zero_padding(self):
        out = conv2d(np.ones((1, 1, 3, 3)), ones_conv())
        self.assertEqual(out[0, 0, 1, 1], 9.0)
        self.assertEqual(out[0, 0, 0, 0], 4.0)
        self.assertEqual(out[0, 0, 2, 2], 4.0)
        self.assertEqual(out[0, 0, 0, 1], 6.0)

    def test_all_ones_full_windows(self):
        for mode in (PaddingMode.CIRCULAR, PaddingMode.REPLICATE, PaddingMode.REFLECT):
            out = conv2d(np.ones((1, 1, 3, 3)), ones_conv(padding=mode))
            np.testing.assert_array_equal(out, np.full((1, 1, 3, 3), 9.0), mode.value)

    def test_zero_padding_breaks_shift_equivariance(self):
        F = np.ones((1, 1, 3, 3))
        spec = ones_conv()
        shifted_then_conv = conv2d(np.roll(F, 1, axis=3), spec)
        conv_then_shifted = np.roll(conv2d(F, spec), 1, axis=3)
        self.assertFalse(np.allclose(shifted_then_conv, conv_then_shifted))

    def test_circular_is_shift_equivariant(self):
        rng = np.random.default_rng(2)
        F = rng.standard_normal((1, 2, 7, 7))
        spec = ConvSpec(weights=rng.standard_normal((3, 2, 3, 3)), padding=PaddingMode.CIRCULAR)
        a = conv2d(np.roll(F, (2, -3), axis=(2, 3)), spec)
        b = np.roll(conv2d(F, spec), (2, -3), axis=(2, 3))
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_dilation(self):
        spec = ones_conv(dilation=2)
        self.assertEqual(spec.pad_amount, 2)
        self.assertEqual(spec.receptive_field, 5)
        out = conv2d(np.ones((1, 1, 5, 5)), spec)
        self.assertEqual(out[0, 0, 2, 2], 9.0)
        self.assertEqual(out[0, 0, 0, 0], 4.0)

    def test_bias_added(self):
        spec = ConvSpec(weights=np.zeros((2, 1, 3, 3)), bias=[1.0, -2.0])
        out = conv2d(np.ones((1, 1, 4, 4)), spec)
        np.testing.assert_array_equal(out[0, 0], np.ones((4, 4)))
        np.testing.assert_array_equal(out[0, 1], np.full((4, 4), -2.0))

    def test_channel_mismatch(self):
        with self.assertRaises(ValueError):
            conv2d(np.ones((1, 2, 4, 4)), ones_conv())

    def test_even_kernel_rejected(self):
        with self.assertRaises(ValueError):
            ConvSpec(weights=np.ones((1, 1, 2, 2)))

    def test_bad_dilation_rejected(self):
        with self.assertRaises(ValueError):
            ConvSpec(weights=np.ones((1, 1, 3, 3)), dilation=0)

    def test_input_untouched(self):
        F = np.random.default_rng(3).standard_normal((1, 1, 4, 4))
        before = F.copy()
        conv2d(F, ones_conv())
        np.testing.assert_array_equal(F, before)


class TestUnfoldFold(unittest.TestCase):
    """Patch extraction and overlap-add"""

    def test_single_window_2x2(self):
        F = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        P = unfold(F, K=2, S=1)
        self.assertEqual(P.data.shape, (1, 4, 1))
        np.testing.assert_array_equal(P.data[0, :, 0], [1, 2, 3, 4])

    def test_single_window_3x3(self):
        F = np.arange(9.0).reshape(1, 1, 3, 3)
        P = unfold(F, K=3, S=1)
        self.assertEqual(P.data.shape, (1, 9, 1))
        np.testing.assert_array_equal(P.data[0, :, 0], np.arange(9.0))

    def test_non_overlapping(self):
        F = np.arange(16.0).reshape(1, 1, 4, 4)
        P = unfold(F, K=2, S=2)
        self.assertEqual(P.data.shape, (1, 4, 4))
        np.testing.assert_array_equal(P.data[0, :, 0], [0, 1, 4, 5])
        np.testing.assert_array_equal(P.data[0, :, 3], [10, 11, 14, 15])
        np.testing.assert_array_equal(fold(P), F)

    def test_row_order_is_channel_major(self):
        F = np.stack([np.zeros((3, 3)), np.ones((3, 3))])[None]
        P = unfold(F, K=3)
        np.testing.assert_array_equal(P.data[0, :9, 0], np.zeros(9))
        np.testing.assert_array_equal(P.data[0, 9:, 0], np.ones(9))

    def test_kernel_too_large(self):
        with self.assertRaises(GeometryError):
            unfold(np.ones((1, 1, 2, 4)), K=3)

    def test_fold_unfold_scales_by_overlap(self):
        F = np.random.default_rng(4).standard_normal((2, 3, 6, 7))
        count = overlap_count(6, 7, 3, 1)
        np.testing.assert_allclose(fold(unfold(F, 3, 1)), F * count, rtol=1e-12)

    def test_fold_preserves_mirror_symmetry(self):
        rng = np.random.default_rng(6)
        for K, S, size in ((3, 1, 9), (5, 1, 11), (3, 2, 11), (2, 1, 8)):
            F = rng.standard_normal((1, 2, size, size))
            F = F + F[..., ::-1]
            F = F + F[..., ::-1, :]
            out = fold(unfold(F, K, S))
            np.testing.assert_array_equal(out, out[..., ::-1])
            np.testing.assert_array_equal(out, out[..., ::-1, :])

    def test_single_window_roundtrip(self):
        F = np.ones((1, 1, 3, 3))
        np.testing.assert_array_equal(fold(unfold(F, 3, 1)), F)

    def test_random_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            K = int(rng.choice([1, 3, 5]))
            S = int(rng.choice([1, 2]))
            H = int(rng.integers(K, 12))
            W = int(rng.integers(K, 12))
            # Full coverage needs S <= K and a window reaching the last row/col
            if S > K or (H - K) % S or (W - K) % S:
                continue
            F = rng.standard_normal((1, 2, H, W))
            out = fold(unfold(F, K, S)) / overlap_count(H, W, K, S)
            np.testing.assert_allclose(out, F, rtol=1e-6, atol=1e-12)

    def test_fold_rejects_bad_geometry(self):
        with self.assertRaises(GeometryError):
            PatchMatrix(np.zeros((1, 9, 3)), 4, 4, 3, 1)
        with self.assertRaises(GeometryError):
            fold(np.zeros((1, 9, 4)))


class TestOverlapCount(unittest.TestCase):
    """Window coverage"""

    def test_single_window(self):
        np.testing.assert_array_equal(overlap_count(3, 3, 3, 1), np.ones((1, 1, 3, 3)))

    def test_non_overlapping(self):
        np.testing.assert_array_equal(overlap_count(4, 4, 2, 2), np.ones((1, 1, 4, 4)))

    def test_window_counting(self):
        count = overlap_count(3, 3, 2, 1)[0, 0]
        self.assertEqual(count[0, 0], 1)
        self.assertEqual(count[0, 1], 2)
        self.assertEqual(count[1, 1], 4)
        self.assertEqual(count[2, 2], 1)

    def test_holes_rejected(self):
        with self.assertRaises(GeometryError):
            overlap_count(7, 7, 3, 4)


if __name__ == '__main__':
    unittest.main()
