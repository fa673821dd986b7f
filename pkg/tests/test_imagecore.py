import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from eagle_ct import imagecore
from eagle_ct.errors import DimensionError, ParameterError

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def small_images(min_side=3, max_side=12):
    return st.tuples(st.integers(min_side, max_side), st.integers(min_side, max_side)).flatmap(
        lambda hw: arrays(np.float64, hw, elements=finite))


def test_zero_sum_kernel_annihilates_constants():
    img = np.full((6, 5), 3.25)
    for k in (imagecore.SCHARR_X, imagecore.SCHARR_Y, [[1, -1, 0], [0, 0, 0], [0, 0, 0]]):
        assert np.array_equal(imagecore.convolve_same(img, k), np.zeros_like(img))


def test_identity_kernel_leaves_impulse_unchanged():
    img = np.zeros((5, 5))
    img[2, 2] = 1.0
    ident = np.zeros((3, 3))
    ident[1, 1] = 1.0
    assert np.array_equal(imagecore.convolve_same(img, ident), img)


def test_ramp_against_loop_oracle():
    ramp = np.tile(np.arange(4.0), (4, 1))
    gx = imagecore.convolve_same(ramp, imagecore.SCHARR_X)
    # frozen output of oracles.convolve: flipped kernel gives -32 on the interior
    expected = np.array([[0.0, -32.0, -32.0, 0.0]] * 4)
    assert np.array_equal(np.array(oracles.convolve(ramp.tolist(), oracles.SCHARR_X)), expected)
    np.testing.assert_array_equal(gx, expected)
    assert np.all(gx[:, 1:-1] == gx[0, 1])


def test_horizontal_ramp_gradients():
    ramp = np.tile(np.arange(7.0), (6, 1))
    gx, gy = imagecore.scharr_gradients(ramp)
    assert np.unique(gx[1:-1, 1:-1]).size == 1
    assert np.all(gy[1:-1, 1:-1] == 0)


def test_scharr_taps():
    assert imagecore.SCHARR_X.tolist() == oracles.SCHARR_X
    assert imagecore.SCHARR_Y.tolist() == oracles.SCHARR_Y


@given(small_images(), st.floats(-50, 50))
def test_gradients_ignore_dc(img, c):
    gx, gy = imagecore.scharr_gradients(img)
    hx, hy = imagecore.scharr_gradients(img + c)
    np.testing.assert_allclose(hx, gx, atol=1e-9 * (1 + abs(c)) * 16)
    np.testing.assert_allclose(hy, gy, atol=1e-9 * (1 + abs(c)) * 16)


def test_constant_image_zero_gradients():
    gx, gy = imagecore.scharr_gradients(np.full((4, 4), -2.0))
    assert not gx.any() and not gy.any()


@given(small_images())
def test_transpose_symmetry(img):
    gx, gy = imagecore.scharr_gradients(img)
    tx, ty = imagecore.scharr_gradients(img.T)
    np.testing.assert_allclose(tx, gy.T, rtol=0, atol=1e-9)
    np.testing.assert_allclose(ty, gx.T, rtol=0, atol=1e-9)


def test_convolution_matches_oracle(rng):
    for h, w in [(3, 3), (4, 7), (12, 12), (9, 5), (11, 12)]:
        img = rng.normal(size=(h, w))
        for kernel in (oracles.SCHARR_X, oracles.SCHARR_Y, rng.normal(size=(3, 3)).tolist()):
            ref = np.array(oracles.convolve(img.tolist(), kernel))
            got = imagecore.convolve_same(img, kernel)
            assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))


def test_convolution_adjoint(rng):
    # <K x, y> == <x, K^T y> is what the loss gradient relies on
    for shape in [(3, 3), (6, 9), (12, 12)]:
        k = rng.normal(size=(3, 3))
        x = rng.normal(size=shape)
        y = rng.normal(size=shape)
        lhs = np.vdot(imagecore.convolve_same(x, k), y)
        rhs = np.vdot(x, imagecore.convolve_same_adjoint(y, k))
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_variance_of_one_to_nine():
    block = np.arange(1.0, 10.0).reshape(3, 3)
    assert oracles.patch_variance(block.tolist(), 3) == [[60 / 9]]
    assert imagecore.unfold_variance(block, 3)[0, 0] == pytest.approx(60 / 9, rel=1e-15)


def test_variance_shape_and_constants():
    assert imagecore.unfold_variance(np.zeros((6, 6)), 3).shape == (2, 2)
    assert not imagecore.unfold_variance(np.full((6, 9), 4.0), 3).any()


def test_variance_matches_oracle(rng):
    for (h, w), n in [((12, 12), 3), ((6, 4), 2), ((10, 5), 5), ((7, 7), 1), ((12, 8), 4)]:
        g = rng.normal(size=(h, w)) * 10
        ref = np.array(oracles.patch_variance(g.tolist(), n))
        got = imagecore.unfold_variance(g, n)
        assert np.max(np.abs(got - ref)) <= 1e-12 * max(np.max(np.abs(ref)), 1e-300)


@given(small_images(6, 12).filter(lambda a: a.shape[0] % 3 == 0 and a.shape[1] % 3 == 0),
       st.floats(-20, 20))
def test_variance_shift_invariant(g, c):
    v = imagecore.unfold_variance(g, 3)
    np.testing.assert_allclose(imagecore.unfold_variance(g + c, 3), v, atol=1e-8 * (1 + c * c))


@given(small_images(6, 12).filter(lambda a: a.shape[0] % 3 == 0 and a.shape[1] % 3 == 0),
       st.floats(-5, 5))
def test_variance_scale_covariant(g, c):
    v = imagecore.unfold_variance(g, 3)
    np.testing.assert_allclose(imagecore.unfold_variance(c * g, 3), c * c * v,
                               rtol=1e-9, atol=1e-9 * (1 + c * c))


def test_variance_backward_matches_directional_derivative(rng):
    g = rng.normal(size=(6, 9))
    w = rng.normal(size=(2, 3))
    d = rng.normal(size=g.shape)
    eps = 1e-6
    num = (np.vdot(imagecore.unfold_variance(g + eps * d, 3), w)
           - np.vdot(imagecore.unfold_variance(g - eps * d, 3), w)) / (2 * eps)
    ana = np.vdot(imagecore.unfold_variance_backward(g, 3, w), d)
    assert ana == pytest.approx(num, rel=1e-7)


def test_non_divisible_names_axis():
    with pytest.raises(DimensionError, match="height 128 is not divisible by patch size 3"):
        imagecore.unfold_variance(np.zeros((128, 129)), 3)
    with pytest.raises(DimensionError, match="width 7"):
        imagecore.unfold_variance(np.zeros((6, 7)), 3)


def test_bad_patch_size():
    with pytest.raises(ParameterError):
        imagecore.unfold_variance(np.zeros((6, 6)), 0)


@pytest.mark.parametrize("bad", [np.zeros((2, 5)), np.zeros(9), np.array([[1.0, np.nan, 0]] * 3)])
def test_invalid_images_rejected(bad):
    with pytest.raises(ValueError):
        imagecore.scharr_gradients(bad)


def test_center_crop():
    img = np.arange(128 * 130, dtype=float).reshape(128, 130)
    out = imagecore.center_crop(img, 3)
    assert out.shape == (126, 129)
    assert out[0, 0] == img[1, 0]
    with pytest.raises(DimensionError):
        imagecore.center_crop_bounds((2, 9), 3)
