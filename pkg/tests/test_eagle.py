import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from eagle_ct import eagle
from eagle_ct.eagle import EagleConfig
from eagle_ct.errors import DimensionError, ParameterError
from eagle_ct.gradcheck import finite_difference_gradient, relative_error

seeds = st.integers(0, 2**32 - 1)


def pair(seed, size=9):
    r = np.random.default_rng(seed)
    return r.random((size, size)), r.random((size, size))


def test_config_defaults_and_validation():
    cfg = EagleConfig()
    assert (cfg.patch_size, cfg.kappa, cfg.lambda_weight) == (3, 0.25, 1e-3)
    for bad in (dict(patch_size=0), dict(kappa=-1.0), dict(lambda_weight=-1e-3),
                dict(kappa=float("nan"))):
        with pytest.raises(ParameterError):
            EagleConfig(**bad)


def test_identity_and_dc_shift():
    a, _ = pair(1)
    assert eagle.eagle_loss(a, a) == 0.0
    assert eagle.eagle_loss(a + 3.0, a) == pytest.approx(0.0, abs=1e-9)


def test_matches_naive_pipeline(rng):
    for case in range(10):
        a = rng.random((12, 12))
        b = rng.random((12, 12))
        kappa = (0.3, 0.1, 0.0, 0.5)[case % 4]
        ref = oracles.eagle_loss(a.tolist(), b.tolist(), 3, kappa)
        got = eagle.eagle_loss(a, b, EagleConfig(3, kappa))
        assert got == pytest.approx(ref, rel=1e-10)


def test_matches_naive_pipeline_rectangular(rng):
    a, b = rng.random((6, 8)), rng.random((6, 8))
    ref = oracles.eagle_loss(a.tolist(), b.tolist(), 2, 0.2)
    assert eagle.eagle_loss(a, b, EagleConfig(2, 0.2)) == pytest.approx(ref, rel=1e-10)


@given(seeds)
def test_nonnegative_and_symmetric(seed):
    a, b = pair(seed)
    lab = eagle.eagle_loss(a, b)
    assert lab >= 0
    assert eagle.eagle_loss(b, a) == pytest.approx(lab, rel=1e-12)


@given(seeds, st.sampled_from([0.5, 2.0, 10.0, -3.0]))
def test_degree_two_homogeneity(seed, c):
    a, b = pair(seed)
    base = eagle.eagle_loss(a, b)
    assert eagle.eagle_loss(c * a, c * b) == pytest.approx(c * c * base, rel=1e-9)


@given(seeds, st.floats(-100, 100))
def test_dc_blindness(seed, c):
    a, b = pair(seed)
    base = eagle.eagle_loss(a, b)
    assert eagle.eagle_loss(a + c, b) == pytest.approx(base, rel=1e-9, abs=1e-9)
    assert eagle.eagle_loss(a, b + c) == pytest.approx(base, rel=1e-9, abs=1e-9)


def test_gradient_zero_at_minimum():
    a, _ = pair(3)
    assert not eagle.eagle_loss_gradient(a, a).any()
    g = eagle.eagle_loss_gradient(a + 0.75, a)
    assert np.max(np.abs(g)) < 1e-9


@pytest.mark.parametrize("trial", range(20))
def test_gradients_match_finite_differences(trial):
    rec, gt = pair(1000 + trial)
    cfg = EagleConfig(3, (0.1, 0.3)[trial % 2])
    num = finite_difference_gradient(lambda x: eagle.eagle_loss(x, gt, cfg), rec, 1e-4)
    assert relative_error(eagle.eagle_loss_gradient(rec, gt, cfg), num) < 1e-4
    num = finite_difference_gradient(lambda x: eagle.combined_loss(x, gt, cfg).total, rec, 1e-4)
    assert relative_error(eagle.combined_loss_gradient(rec, gt, cfg), num) < 1e-4


def test_gradient_with_center_crop():
    rec, gt = pair(7, size=10)
    cfg = EagleConfig(3, 0.2, center_crop=True)
    num = finite_difference_gradient(lambda x: eagle.eagle_loss(x, gt, cfg), rec, 1e-4)
    g = eagle.eagle_loss_gradient(rec, gt, cfg)
    assert relative_error(g, num) < 1e-4
    # the outer ring is cropped away and must get no gradient
    assert not g[9, :].any() and not g[:, 9].any()


def test_non_divisible_rejected_without_crop():
    with pytest.raises(DimensionError, match="height 10"):
        eagle.eagle_loss(np.zeros((10, 9)), np.zeros((10, 9)))
    with pytest.raises(DimensionError):
        eagle.eagle_loss(np.zeros((9, 9)), np.zeros((6, 6)))


def test_combined_identical_and_dc_shift():
    a, _ = pair(4)
    b = eagle.combined_loss(a, a)
    assert (b.total, b.mse_term, b.eagle_term) == (0.0, 0.0, 0.0)
    b = eagle.combined_loss(a + 0.1, a)
    assert b.mse_term == pytest.approx(0.01, rel=1e-12)
    assert b.eagle_term == pytest.approx(0.0, abs=1e-9)
    assert b.total == pytest.approx(0.01, rel=1e-6)


def test_combined_composition(rng):
    a, b = rng.random((9, 9)), rng.random((9, 9))
    out = eagle.combined_loss(a, b)
    assert out.mse_term == pytest.approx(np.mean((a - b) ** 2), rel=1e-14)
    assert out.eagle_term == eagle.eagle_loss(a, b)
    assert out.total == pytest.approx(out.mse_term + 1e-3 * out.eagle_term, rel=1e-15)
    assert out.as_row() == {"total": out.total, "mse": out.mse_term, "eagle": out.eagle_term}


def test_combined_gradient_degenerate_cases(rng):
    a, b = rng.random((9, 9)), rng.random((9, 9))
    assert not eagle.combined_loss_gradient(a, a).any()
    g = eagle.combined_loss_gradient(a, b, EagleConfig(lambda_weight=0.0))
    assert np.array_equal(g, eagle.mse_gradient(a, b))


def test_tv_values():
    assert eagle.tv_value(np.full((4, 4), 2.0)) == 0.0
    assert not eagle.tv_gradient(np.full((4, 4), 2.0)).any()
    assert eagle.tv_value(np.array([[0.0, 1.0], [0.0, 1.0]])) == 2.0


def test_tv_gradient_finite_differences(rng):
    img = rng.random((8, 8))
    num = finite_difference_gradient(eagle.tv_value, img, 1e-6)
    np.testing.assert_allclose(eagle.tv_gradient(img), num, atol=1e-6)


def test_tv_too_small():
    with pytest.raises(DimensionError):
        eagle.tv_value(np.zeros((1, 5)))
