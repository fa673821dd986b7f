"""Frequency half of the loss: DFT, Gaussian high-pass weights, weighted magnitudes.

All spectra stay in numpy's unshifted layout (DC at index ``[0, 0]``).
Frequencies are in cycles per sample of the transformed grid.
"""
import numpy as np

from .errors import DimensionError, ParameterError


def dft2(grid):
    """Unnormalized forward 2D DFT of a real grid."""
    x = np.asarray(grid, dtype=np.float64)
    if x.ndim != 2 or min(x.shape) < 1:
        raise DimensionError(f"grid must be a non-empty 2D array, got shape {x.shape}")
    return np.fft.fft2(x)


def radial_frequency(height, width):
    """Radius ``sqrt(fx^2 + fy^2)`` of every bin, wrapped signed frequencies."""
    fy = np.fft.fftfreq(height)
    fx = np.fft.fftfreq(width)
    return np.sqrt(fy[:, None] ** 2 + fx[None, :] ** 2)


def gaussian_highpass(width, height, kappa):
    """Weights ``1 - exp(-(r - kappa)^2 / 2)`` on a ``height x width`` grid.

    The weight vanishes on the ring ``r == kappa``; the Gaussian has unit
    standard deviation in normalized frequency.
    """
    if int(width) != width or int(height) != height or width < 1 or height < 1:
        raise DimensionError(f"width and height must be positive integers, got {width}x{height}")
    if not np.isfinite(kappa) or kappa < 0:
        raise ParameterError(f"kappa must be >= 0, got {kappa!r}")
    r = radial_frequency(int(height), int(width))
    return -np.expm1(-0.5 * (r - kappa) ** 2)


def magnitude_spectrum(grid, weights):
    """Elementwise ``weights * |dft2(grid)|``."""
    x = np.asarray(grid, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.shape != w.shape:
        raise DimensionError(f"grid shape {x.shape} does not match weights shape {w.shape}")
    return w * np.abs(dft2(x))


def magnitude_spectrum_backward(grid, weights, grad_mag):
    """Gradient w.r.t. ``grid`` given d loss / d magnitude spectrum.

    The modulus derivative is ``conj(z) / |z|``, taken as 0 where ``z == 0``.
    """
    x = np.asarray(grid, dtype=np.float64)
    z = dft2(x)
    a = np.abs(z)
    g = np.asarray(weights, dtype=np.float64) * np.asarray(grad_mag, dtype=np.float64)
    phase = np.zeros_like(z)
    nz = a > 0
    phase[nz] = z[nz] / a[nz]
    # adjoint of the unnormalized DFT is size * ifft2
    return np.real(np.fft.ifft2(g * phase)) * x.size


def energy(grid):
    x = np.asarray(grid)
    return float(np.sum(np.abs(x) ** 2))
