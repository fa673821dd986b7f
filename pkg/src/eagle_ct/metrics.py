"""Image-quality metrics: PSNR, SSIM, and a high-frequency energy fraction."""
from dataclasses import dataclass
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, ParameterError

SSIM_WINDOW = 7
_K1, _K2 = 0.01, 0.03


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    ssim: float
    data_range: float


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _range(data_range):
    if not (data_range > 0 and math.isfinite(data_range)):
        raise ParameterError(f"data_range must be a finite positive number, got {data_range!r}")
    return float(data_range)


def default_range(gt):
    gt = np.asarray(gt)
    return float(gt.max() - gt.min())


def psnr(a, b, data_range):
    a, b = _pair(a, b)
    err = float(np.mean((a - b) ** 2))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(_range(data_range) ** 2 / err)


def ssim_map(a, b, data_range):
    """Local SSIM over every fully contained 7x7 uniform window.

    Window statistics are population moments (divide by 49).
    """
    a, b = _pair(a, b)
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise DimensionError(f"SSIM needs 2D images of at least 7x7, got {a.shape}")
    L = _range(data_range)
    c1 = (_K1 * L) ** 2
    c2 = (_K2 * L) ** 2
    wa = sliding_window_view(a, (SSIM_WINDOW, SSIM_WINDOW))
    wb = sliding_window_view(b, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    da = wa - mu_a[..., None, None]
    db = wb - mu_b[..., None, None]
    var_a = (da * da).mean(axis=(-2, -1))
    var_b = (db * db).mean(axis=(-2, -1))
    cov = (da * db).mean(axis=(-2, -1))
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
        (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2))


def ssim(a, b, data_range):
    return float(np.mean(ssim_map(a, b, data_range)))


def report(rec, gt, data_range=None, mask=None):
    """PSNR and SSIM of ``rec`` against ``gt``.

    ``mask`` restricts PSNR to the selected pixels; SSIM always uses the
    whole image. ``data_range`` defaults to ``gt.max() - gt.min()``.
    """
    rec, gt = _pair(rec, gt)
    if data_range is None:
        data_range = default_range(gt)
    if mask is None:
        p = psnr(rec, gt, data_range)
    else:
        p = psnr(rec[mask], gt[mask], data_range)
    return MetricReport(p, ssim(rec, gt, data_range), float(data_range))


def inscribed_circle(size):
    centre = 0.5 * (size - 1)
    r, c = np.mgrid[:size, :size]
    return (r - centre) ** 2 + (c - centre) ** 2 <= (0.5 * size) ** 2


def high_frequency_energy(image, cutoff=0.25):
    """Fraction of spectral energy at radial frequency above ``cutoff``.

    The default cutoff is half the Nyquist frequency (cycles per pixel).
    """
    img = np.asarray(image, dtype=np.float64)
    power = np.abs(np.fft.fft2(img)) ** 2
    fy = np.fft.fftfreq(img.shape[0])
    fx = np.fft.fftfreq(img.shape[1])
    radius = np.sqrt(fy[:, None] ** 2 + fx[None, :] ** 2)
    total = power.sum()
    if total == 0:
        return 0.0
    return float(power[radius > cutoff].sum() / total)
