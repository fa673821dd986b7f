import numpy as np
import pytest

from eagle_ct import metrics, phantom, tffilter, tomo
from eagle_ct.eagle import EagleConfig
from eagle_ct.errors import ConfigurationError, ParameterError
from eagle_ct.experiments import random_dataset

SIZE = 36
ANGLES = 24


@pytest.fixture(scope="module")
def geom():
    return tomo.Geometry.covering(SIZE, ANGLES)


@pytest.fixture(scope="module")
def noisy():
    return random_dataset(2, SIZE, ANGLES, noise_sigma=0.01, seed=3, num_ellipses=5)


@pytest.fixture(scope="module")
def samples(noisy):
    return tffilter.prepare_dataset(noisy, 15)


def test_dc_coefficient_is_all_pass():
    fc = tffilter.FilterCoefficients([1.0, 0, 0, 0], 51)
    np.testing.assert_allclose(tffilter.filter_response(fc), 1.0)


def test_zero_coefficients_give_zero(geom, rng):
    fc = tffilter.FilterCoefficients(np.zeros(7), geom.num_detectors)
    assert not tffilter.filter_response(fc).any()
    sino = tomo.Sinogram(geom, rng.random((ANGLES, geom.num_detectors)))
    assert not tffilter.tf_fbp_reconstruct(sino, geom, fc, SIZE).any()


def test_ramp_fit_improves_with_more_terms():
    f = tomo.detector_frequencies(185)
    errs = [np.max(np.abs(tffilter.filter_response(tffilter.ramp_coefficients(185, p)) - f))
            for p in (4, 16, 63, 127)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_ramp_fit_is_least_squares():
    basis = tffilter.cosine_basis(101, 9)
    fc = tffilter.ramp_coefficients(101, 9)
    resid = basis @ fc.coeffs - tomo.detector_frequencies(101)
    # normal equations hold at the optimum
    np.testing.assert_allclose(basis.T @ resid, 0.0, atol=1e-10)


def test_response_is_even_cosine_series():
    basis = tffilter.cosine_basis(33, 5)
    f = tomo.detector_frequencies(33)
    np.testing.assert_allclose(basis[:, 3], np.cos(np.pi * 3 * f / f[-1]))


def test_ramp_filter_close_to_fbp():
    gt = phantom.shepp_logan(128)
    g = tomo.Geometry.covering(128, 180)
    sino = tomo.radon_forward(gt, g)
    fbp = tomo.fbp_reconstruct(sino, g, 128)
    tf = tffilter.tf_fbp_reconstruct(sino, g, tffilter.ramp_coefficients(g.num_detectors), 128)
    mask = metrics.inscribed_circle(128)
    p_fbp = metrics.report(fbp, gt, mask=mask).psnr_db
    p_tf = metrics.report(tf, gt, mask=mask).psnr_db
    assert abs(p_fbp - p_tf) < 1.0


def test_linear_in_coefficients(geom, rng):
    sino = tomo.Sinogram(geom, rng.random((ANGLES, geom.num_detectors)))
    c1, c2 = rng.normal(size=9), rng.normal(size=9)
    rec = lambda c: tffilter.tf_fbp_reconstruct(
        sino, geom, tffilter.FilterCoefficients(c, geom.num_detectors), SIZE)
    lhs = rec(2.5 * c1 - 0.7 * c2)
    rhs = 2.5 * rec(c1) - 0.7 * rec(c2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9 * max(1.0, np.max(np.abs(rhs)))


def test_basis_reconstructions_compose(samples):
    s = samples[0]
    geom = s.sinogram.geometry
    c = np.linspace(1, -1, 15)
    direct = tffilter.tf_fbp_reconstruct(s.sinogram, geom,
                                         tffilter.FilterCoefficients(c, geom.num_detectors), SIZE)
    np.testing.assert_allclose(np.tensordot(c, s.basis, axes=1), direct, atol=1e-12)


def test_single_coefficient_gradient(noisy):
    cfg = EagleConfig(kappa=0.2, lambda_weight=1e-3)
    samples = tffilter.prepare_dataset(noisy[:1], 1)
    c = np.array([0.12])
    _, _, _, grad = tffilter.loss_and_gradient(c, samples, cfg)
    h = 1e-6
    num = (tffilter.loss_and_gradient(c + h, samples, cfg)[0]
           - tffilter.loss_and_gradient(c - h, samples, cfg)[0]) / (2 * h)
    assert abs(grad[0] - num) / abs(num) < 1e-4


def test_full_gradient_directional(samples, rng):
    cfg = EagleConfig(kappa=0.3)
    c = tffilter.ramp_coefficients(samples[0].sinogram.geometry.num_detectors, 15).coeffs
    _, _, _, grad = tffilter.loss_and_gradient(c, samples, cfg)
    d = rng.normal(size=c.size)
    h = 1e-6
    num = (tffilter.loss_and_gradient(c + h * d, samples, cfg)[0]
           - tffilter.loss_and_gradient(c - h * d, samples, cfg)[0]) / (2 * h)
    assert np.dot(grad, d) == pytest.approx(num, rel=1e-4)


def test_zero_learning_rate_keeps_coefficients(samples):
    start = tffilter.ramp_coefficients(samples[0].sinogram.geometry.num_detectors, 15)
    fc, log = tffilter.train_filter(samples, epochs=3, learning_rate=0.0, initial=start)
    assert np.array_equal(fc.coeffs, start.coeffs)
    assert len({row["total"] for row in log}) == 1


@pytest.mark.parametrize("optimizer", tffilter.OPTIMIZERS)
def test_noise_free_training_nonincreasing(optimizer):
    data = random_dataset(2, SIZE, ANGLES, noise_sigma=0.0, seed=9, num_ellipses=4)
    lr = {"newton-mse": 0.5, "adam": 1e-3, "gd": 1e-2}[optimizer]
    _, log = tffilter.train_filter(data, epochs=10, learning_rate=lr, num_coeffs=11,
                                   optimizer=optimizer)
    totals = [row["total"] for row in log]
    assert [row["epoch"] for row in log] == list(range(11))
    assert all(b <= a for a, b in zip(totals, totals[1:]))
    assert totals[-1] < totals[0]


def test_log_terms_consistent(samples):
    cfg = EagleConfig(lambda_weight=0.01)
    _, log = tffilter.train_filter(samples, cfg, epochs=2)
    for row in log:
        assert row["total"] == pytest.approx(row["mse"] + 0.01 * row["eagle"], rel=1e-12)


def test_training_deterministic(noisy):
    a = tffilter.train_filter(noisy, epochs=3, num_coeffs=9)
    b = tffilter.train_filter(noisy, epochs=3, num_coeffs=9)
    assert a[0].coeffs.tobytes() == b[0].coeffs.tobytes()
    assert a[1] == b[1]


def test_training_errors(noisy, samples):
    with pytest.raises(ConfigurationError):
        tffilter.train_filter([], epochs=1)
    with pytest.raises(ParameterError):
        tffilter.train_filter(samples, epochs=0)
    with pytest.raises(ParameterError):
        tffilter.train_filter(samples, epochs=1, optimizer="lbfgs")
    with pytest.raises(ConfigurationError):
        tffilter.train_filter(samples, epochs=1,
                              initial=tffilter.FilterCoefficients(np.ones(3), 10))
    other = random_dataset(1, SIZE, ANGLES + 1, seed=1)
    with pytest.raises(ConfigurationError):
        tffilter.prepare_dataset(noisy + other, 3)
    g = noisy[0][0].geometry
    with pytest.raises(ConfigurationError):
        tffilter.tf_fbp_reconstruct(noisy[0][0], g, tffilter.FilterCoefficients([1.0], 7), SIZE)
    with pytest.raises(ParameterError):
        tffilter.FilterCoefficients([], 7)


def test_ablation_repeated_kappa_identical(samples):
    rows = tffilter.kappa_ablation(samples, [0.2, 0.2], epochs=2)
    a, b = rows
    assert a.coefficients.coeffs.tobytes() == b.coefficients.coeffs.tobytes()
    assert (a.psnr, a.ssim, a.hf_energy, a.history) == (b.psnr, b.ssim, b.hf_energy, b.history)


def test_ablation_single_zero_kappa(samples):
    (row,) = tffilter.kappa_ablation(samples, [0.0], epochs=1)
    assert row.kappa == 0.0
    assert np.isfinite(row.psnr) and 0 <= row.hf_energy <= 1
    with pytest.raises(ParameterError):
        tffilter.kappa_ablation(samples, [])


def test_trend_helper():
    Row = lambda k, hf: tffilter.AblationRow(k, None, None, 0, 0, hf, [])
    assert tffilter.high_frequency_trend_ok([Row(0.1, 1.0), Row(0.2, 1.1), Row(0.3, 1.2)])
    assert tffilter.high_frequency_trend_ok([Row(0.1, 1.0), Row(0.2, 0.99), Row(0.3, 1.2)])
    assert not tffilter.high_frequency_trend_ok([Row(0.1, 1.0), Row(0.2, 0.9)])
    assert not tffilter.high_frequency_trend_ok(
        [Row(0.1, 1.0), Row(0.2, 0.99), Row(0.3, 0.985)])
