"""The spectral edge loss, the MSE + loss training objective, and TV.

Pipeline per image and axis: Scharr gradient map -> per-patch population
variance -> unnormalized DFT -> Gaussian high-pass weighted modulus. The loss
is the mean absolute difference of those weighted spectra, summed over the
x and y axes.
"""
from dataclasses import dataclass

import numpy as np

from . import imagecore, spectral
from .errors import DimensionError, ParameterError


@dataclass(frozen=True)
class EagleConfig:
    """Loss hyperparameters.

    ``center_crop`` opts in to cropping both images to their largest centred
    multiple of ``patch_size`` before the loss; without it, non-divisible
    shapes raise :class:`DimensionError`.
    """

    patch_size: int = 3
    kappa: float = 0.25
    lambda_weight: float = 1e-3
    center_crop: bool = False

    def __post_init__(self):
        if int(self.patch_size) != self.patch_size or self.patch_size < 1:
            raise ParameterError(f"patch_size must be a positive integer, got {self.patch_size!r}")
        if not np.isfinite(self.kappa) or self.kappa < 0:
            raise ParameterError(f"kappa must be >= 0, got {self.kappa!r}")
        if not np.isfinite(self.lambda_weight) or self.lambda_weight < 0:
            raise ParameterError(f"lambda_weight must be >= 0, got {self.lambda_weight!r}")


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    mse_term: float
    eagle_term: float

    def as_row(self):
        return {"total": self.total, "mse": self.mse_term, "eagle": self.eagle_term}


def _pair(rec, gt):
    rec = imagecore.as_image(rec, "rec")
    gt = imagecore.as_image(gt, "gt")
    if rec.shape != gt.shape:
        raise DimensionError(f"rec shape {rec.shape} does not match gt shape {gt.shape}")
    return rec, gt


def _region(shape, cfg):
    n = cfg.patch_size
    if cfg.center_crop:
        return imagecore.center_crop_bounds(shape, n)
    h, w = shape
    if h % n:
        raise DimensionError(f"height {h} is not divisible by patch size {n}")
    if w % n:
        raise DimensionError(f"width {w} is not divisible by patch size {n}")
    return (slice(0, h), slice(0, w))


_KERNELS = (imagecore.SCHARR_X, imagecore.SCHARR_Y)


def _axis_spectra(img, n, weights):
    out = []
    for kernel in _KERNELS:
        grad = imagecore.convolve_same(img, kernel)
        var = imagecore.unfold_variance(grad, n)
        out.append((grad, var, spectral.magnitude_spectrum(var, weights)))
    return out


def _weights(shape, cfg):
    n = cfg.patch_size
    return spectral.gaussian_highpass(shape[1] // n, shape[0] // n, cfg.kappa)


def eagle_loss(rec, gt, cfg=EagleConfig()):
    rec, gt = _pair(rec, gt)
    region = _region(rec.shape, cfg)
    rec, gt = rec[region], gt[region]
    weights = _weights(rec.shape, cfg)
    count = weights.size
    total = 0.0
    for (_, _, m_rec), (_, _, m_gt) in zip(_axis_spectra(rec, cfg.patch_size, weights),
                                           _axis_spectra(gt, cfg.patch_size, weights)):
        total += np.sum(np.abs(m_rec - m_gt)) / count
    return float(total)


# Spectrum differences this small relative to the spectrum scale are rounding
# noise (e.g. rec = gt + constant) and take the sign(0) = 0 branch.
_SIGN_DEADBAND = 1e-10


def _l1_sign(m_rec, m_gt):
    diff = m_rec - m_gt
    scale = max(float(np.max(m_rec)), float(np.max(m_gt)))
    out = np.sign(diff)
    out[np.abs(diff) <= _SIGN_DEADBAND * scale] = 0.0
    return out


def eagle_loss_gradient(rec, gt, cfg=EagleConfig()):
    """Gradient of :func:`eagle_loss` with respect to ``rec``.

    Subgradient conventions: ``sign(0) = 0`` for the L1 term and a zero
    modulus derivative at empty DFT bins.
    """
    rec, gt = _pair(rec, gt)
    full_shape = rec.shape
    region = _region(full_shape, cfg)
    rec_c, gt_c = rec[region], gt[region]
    n = cfg.patch_size
    weights = _weights(rec_c.shape, cfg)
    count = weights.size
    grad = np.zeros(rec_c.shape)
    for kernel, (g_map, var, m_rec), (_, _, m_gt) in zip(
            _KERNELS, _axis_spectra(rec_c, n, weights), _axis_spectra(gt_c, n, weights)):
        d_mag = _l1_sign(m_rec, m_gt) / count
        d_var = spectral.magnitude_spectrum_backward(var, weights, d_mag)
        d_gmap = imagecore.unfold_variance_backward(g_map, n, d_var)
        grad += imagecore.convolve_same_adjoint(d_gmap, kernel)
    out = np.zeros(full_shape)
    out[region] = grad
    return out


def mse(rec, gt):
    rec, gt = _pair(rec, gt)
    return float(np.mean((rec - gt) ** 2))


def mse_gradient(rec, gt):
    rec, gt = _pair(rec, gt)
    return 2.0 * (rec - gt) / rec.size


def combined_loss(rec, gt, cfg=EagleConfig()):
    """MSE plus ``lambda_weight`` times the spectral edge loss."""
    m = mse(rec, gt)
    e = eagle_loss(rec, gt, cfg)
    return LossBreakdown(total=m + cfg.lambda_weight * e, mse_term=m, eagle_term=e)


def combined_loss_gradient(rec, gt, cfg=EagleConfig()):
    grad = mse_gradient(rec, gt)
    if cfg.lambda_weight != 0.0:
        grad = grad + cfg.lambda_weight * eagle_loss_gradient(rec, gt, cfg)
    return grad


def _tv_input(image):
    img = imagecore.as_image(image)
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise DimensionError(f"TV needs an image of at least 2x2, got {img.shape}")
    return img


def tv_value(image):
    """Anisotropic total variation from forward differences."""
    img = _tv_input(image)
    return float(np.abs(np.diff(img, axis=0)).sum() + np.abs(np.diff(img, axis=1)).sum())


def tv_gradient(image):
    img = _tv_input(image)
    grad = np.zeros_like(img)
    s = np.sign(np.diff(img, axis=0))
    grad[1:, :] += s
    grad[:-1, :] -= s
    s = np.sign(np.diff(img, axis=1))
    grad[:, 1:] += s
    grad[:, :-1] -= s
    return grad
