"""Tests for the qconv.py quantum convolution."""
import math

import numpy as np
import pytest

import qsim
from colorspace import ColorSpace, ImageTensor
from qconv import (
    FeatureMap,
    QConvError,
    QuantumConv,
    extract_windows,
    output_shape,
    qconv_backward,
    qconv_backward_batch,
    qconv_forward,
    qconv_forward_batch,
)
from templates import ChannelMode, build_template


@pytest.fixture
def angles(rng):
    """Two 5x5 single-channel angle images."""
    return rng.uniform(-math.pi, math.pi, size=(2, 5, 5, 1))


class TestWindows:
    """Tests for window extraction."""

    @pytest.mark.parametrize("size,stride,expected", [(10, 1, (9, 9)), (10, 2, (5, 5)), (2, 1, (1, 1)), (5, 2, (2, 2))])
    def test_output_shape(self, size, stride, expected):
        """Valid 2x2 convolution sizes."""
        assert output_shape(size, size, stride) == expected

    def test_too_small(self):
        """Images smaller than the kernel are refused."""
        with pytest.raises(QConvError):
            output_shape(1, 4)

    def test_pixel_order(self):
        """Windows list top-left, top-right, bottom-left, bottom-right."""
        image = np.arange(9, dtype=float).reshape(3, 3, 1)
        windows = extract_windows(image)
        assert windows.shape == (2, 2, 4)
        np.testing.assert_array_equal(windows[0, 0], [0, 1, 3, 4])
        np.testing.assert_array_equal(windows[1, 1], [4, 5, 7, 8])

    def test_channel_major(self):
        """Three-channel windows keep each channel's four pixels together."""
        image = np.stack([np.zeros((2, 2)), np.ones((2, 2)), 2 * np.ones((2, 2))], axis=-1)
        np.testing.assert_array_equal(extract_windows(image)[0, 0], [0] * 4 + [1] * 4 + [2] * 4)

    def test_stride_two(self):
        """Stride 2 skips every other window."""
        image = np.arange(16, dtype=float).reshape(4, 4, 1)
        windows = extract_windows(image, stride=2)
        np.testing.assert_array_equal(windows[1, 0], [8, 9, 12, 13])


class TestForward:
    """Tests for the forward pass."""

    def test_matches_direct_readout(self, angles, rng):
        """Each feature is the circuit readout of its window."""
        t = build_template("U2_CROT")
        params = rng.uniform(0, 2 * math.pi, t.n_trainable)
        fmap = qconv_forward(angles[0], t, params)
        assert isinstance(fmap, FeatureMap)
        assert (fmap.height, fmap.width) == (4, 4)
        window = angles[0, 1:3, 2:4, 0].reshape(-1)
        assert fmap.values[1, 2] == pytest.approx(qsim.readout(t, params, window), abs=1e-12)

    def test_values_in_range(self, angles, rng):
        """Features are ⟨Z⟩ values in [-1, 1]."""
        t = build_template("C13")
        maps = qconv_forward_batch(angles, t, rng.uniform(0, 2 * math.pi, t.n_trainable))
        assert maps.shape == (2, 4, 4)
        assert np.all(np.abs(maps) <= 1.0)

    def test_pixel_change_is_local(self, rng):
        """Changing pixel (r, c) only moves features (r-1..r, c-1..c)."""
        t = build_template("U2_CROT")
        params = rng.uniform(0, 2 * math.pi, t.n_trainable)
        image = rng.uniform(-math.pi, math.pi, size=(6, 6, 1))
        base = qconv_forward(image, t, params).values
        for r in range(6):
            for c in range(6):
                changed = image.copy()
                changed[r, c, 0] = 0.0 if abs(changed[r, c, 0]) > 0.5 else 2.0
                moved = np.abs(qconv_forward(changed, t, params).values - base) > 1e-12
                allowed = np.zeros_like(moved)
                allowed[max(r - 1, 0):r + 1, max(c - 1, 0):c + 1] = True
                assert not np.any(moved & ~allowed), (r, c)

    def test_window_order_irrelevant(self, angles, rng):
        """Evaluating windows in shuffled order gives the same map."""
        t = build_template("C14")
        params = rng.uniform(0, 2 * math.pi, t.n_trainable)
        expected = qconv_forward_batch(angles, t, params)
        flat = extract_windows(angles).reshape(-1, t.n_encoding)
        order = rng.permutation(len(flat))
        shuffled = np.asarray(qsim.readout(t, params, flat[order]))
        restored = np.empty_like(shuffled)
        restored[order] = shuffled
        np.testing.assert_allclose(restored.reshape(expected.shape), expected, atol=1e-12)
        one_by_one = [qsim.readout(t, params, w) for w in flat[::-1]][::-1]
        np.testing.assert_allclose(np.reshape(one_by_one, expected.shape), expected, atol=1e-12)

    def test_zero_image_zero_params(self):
        """All-zero angles and parameters give a map of ones."""
        t = build_template("C18")
        fmap = qconv_forward(np.zeros((3, 3, 1)), t, np.zeros(t.n_trainable))
        np.testing.assert_allclose(fmap.values, 1.0, atol=1e-10)

    def test_channel_mismatch(self, angles):
        """A three-channel template refuses a one-channel image."""
        t = build_template("C14", ChannelMode.CHANNEL_OVERWRITE)
        with pytest.raises(QConvError):
            qconv_forward(angles[0], t, np.zeros(t.n_trainable))

    def test_rejects_out_of_range_angles(self):
        """Angles beyond π are refused."""
        t = build_template("C14")
        with pytest.raises(QConvError):
            qconv_forward(np.full((2, 2, 1), 4.0), t, np.zeros(t.n_trainable))

    def test_rejects_wrong_space(self):
        """ImageTensor input must already be angles."""
        t = build_template("C14")
        img = ImageTensor(np.zeros((2, 2, 1)), ColorSpace.UNIT)
        with pytest.raises(QConvError):
            qconv_forward(img, t, np.zeros(t.n_trainable))

    def test_wrong_parameter_count(self, angles):
        """Parameter vectors must match the template."""
        with pytest.raises(QConvError):
            qconv_forward(angles[0], build_template("C14"), np.zeros(3))


class TestBackward:
    """Tests for the backward pass."""

    def test_matches_finite_differences(self, angles, rng):
        """Σ upstream ⊙ ∂features/∂params matches a central difference."""
        t = build_template("U1_CROT")
        params = rng.uniform(0, 2 * math.pi, t.n_trainable)
        upstream = rng.normal(size=(2, 4, 4))
        analytic = qconv_backward_batch(angles, t, params, upstream)
        h = 1e-5
        numeric = np.zeros_like(params)
        for k in range(len(params)):
            plus, minus = params.copy(), params.copy()
            plus[k] += h
            minus[k] -= h
            diff = qconv_forward_batch(angles, t, plus) - qconv_forward_batch(angles, t, minus)
            numeric[k] = np.sum(upstream * diff) / (2 * h)
        np.testing.assert_allclose(analytic, numeric, atol=1e-6)

    def test_linear_in_upstream(self, angles, rng):
        """backward(a g1 + b g2) = a backward(g1) + b backward(g2)."""
        t = build_template("C19")
        params = rng.uniform(0, 2 * math.pi, t.n_trainable)
        g1, g2 = rng.normal(size=(4, 4)), rng.normal(size=(4, 4))
        combined = qconv_backward(angles[0], t, params, 2.0 * g1 - 0.5 * g2)
        separate = 2.0 * qconv_backward(angles[0], t, params, g1) - 0.5 * qconv_backward(angles[0], t, params, g2)
        np.testing.assert_allclose(combined, separate, atol=1e-10)

    def test_upstream_shape_checked(self, angles):
        """Upstream gradients must match the feature map."""
        t = build_template("C19")
        with pytest.raises(QConvError):
            qconv_backward(angles[0], t, np.zeros(t.n_trainable), np.zeros((3, 3)))


class TestQuantumConv:
    """Tests for the layer object."""

    def test_counts_evaluations(self, angles, rng):
        """Every forward call adds one circuit per window."""
        layer = QuantumConv.initialized(build_template("U1_CRX"), rng)
        layer.forward(angles)
        layer.forward(angles[:1])
        assert layer.evaluations == 2 * 16 + 16

    def test_initial_parameters_in_range(self, rng):
        """Initial parameters are uniform in [0, 2π)."""
        layer = QuantumConv.initialized(build_template("U2_CROT", ChannelMode.CHANNEL_OVERWRITE), rng)
        assert layer.params.shape == (36,)
        assert np.all((layer.params >= 0) & (layer.params < 2 * math.pi))

    def test_stride(self, rng):
        """The layer honours its stride."""
        layer = QuantumConv.initialized(build_template("C14"), rng, stride=2)
        assert layer.output_shape(10, 10) == (5, 5)
