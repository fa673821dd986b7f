"""Spatial half of the loss: 3x3 convolution, Scharr gradients, patch variances.

Images are 2D float64 arrays indexed ``[row, col]`` (height x width).
"""
import numpy as np

from .errors import DimensionError, ParameterError

SCHARR_X = np.array([[-3.0, 0.0, 3.0],
                     [-10.0, 0.0, 10.0],
                     [-3.0, 0.0, 3.0]])
SCHARR_Y = SCHARR_X.T.copy()


def as_image(image, name="image"):
    """Validate and convert to a finite 2D float64 array."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def _as_kernel(kernel):
    k = np.asarray(kernel, dtype=np.float64)
    if k.shape != (3, 3) or not np.all(np.isfinite(k)):
        raise DimensionError(f"kernel must be a finite 3x3 array, got shape {k.shape}")
    return k


def _check_min_size(img):
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise DimensionError(f"image must be at least 3x3, got {img.shape[0]}x{img.shape[1]}")


def convolve_same(image, kernel):
    """True 2D convolution with a 3x3 kernel, reflect padding, same-size output.

    Reflect padding mirrors about the edge pixel without repeating it
    (numpy's ``mode="reflect"``).
    """
    img = as_image(image)
    k = _as_kernel(kernel)
    _check_min_size(img)
    h, w = img.shape
    pad = np.pad(img, 1, mode="reflect")
    out = np.zeros_like(img)
    # out[r, c] = sum_{i,j} k[i, j] * img[r + 1 - i, c + 1 - j]
    for i in range(3):
        for j in range(3):
            if k[i, j] != 0.0:
                out += k[i, j] * pad[2 - i:2 - i + h, 2 - j:2 - j + w]
    return out


def convolve_same_adjoint(grad_out, kernel):
    """Adjoint of :func:`convolve_same`, for backpropagating through it."""
    g = np.asarray(grad_out, dtype=np.float64)
    k = _as_kernel(kernel)
    _check_min_size(g)
    h, w = g.shape
    gpad = np.zeros((h + 2, w + 2))
    for i in range(3):
        for j in range(3):
            if k[i, j] != 0.0:
                gpad[2 - i:2 - i + h, 2 - j:2 - j + w] += k[i, j] * g
    # fold the reflected border back onto the pixels it was copied from
    gpad[2, :] += gpad[0, :]
    gpad[h - 1, :] += gpad[h + 1, :]
    gpad[:, 2] += gpad[:, 0]
    gpad[:, w - 1] += gpad[:, w + 1]
    return gpad[1:h + 1, 1:w + 1].copy()


def scharr_gradients(image):
    """Return ``(gx, gy)``, the Scharr gradient maps of ``image``."""
    img = as_image(image)
    return convolve_same(img, SCHARR_X), convolve_same(img, SCHARR_Y)


def _check_divisible(shape, n):
    if int(n) != n or n < 1:
        raise ParameterError(f"patch size must be a positive integer, got {n!r}")
    h, w = shape
    if h % n:
        raise DimensionError(f"height {h} is not divisible by patch size {n}")
    if w % n:
        raise DimensionError(f"width {w} is not divisible by patch size {n}")


def _blocks(arr, n):
    h, w = arr.shape
    return arr.reshape(h // n, n, w // n, n)


def unfold_variance(gradient_map, n):
    """Population variance of each non-overlapping ``n x n`` patch.

    Returns an array of shape ``(height // n, width // n)``.
    """
    g = as_image(gradient_map, "gradient_map")
    _check_divisible(g.shape, n)
    blocks = _blocks(g, n)
    mean = blocks.mean(axis=(1, 3), keepdims=True)
    return ((blocks - mean) ** 2).mean(axis=(1, 3))


def unfold_variance_backward(gradient_map, n, grad_var):
    """Chain ``grad_var`` (d loss / d variance map) back to the gradient map."""
    g = np.asarray(gradient_map, dtype=np.float64)
    _check_divisible(g.shape, n)
    gv = np.asarray(grad_var, dtype=np.float64)
    if gv.shape != (g.shape[0] // n, g.shape[1] // n):
        raise DimensionError(f"grad_var shape {gv.shape} does not match variance map")
    blocks = _blocks(g, n)
    centered = blocks - blocks.mean(axis=(1, 3), keepdims=True)
    out = (2.0 / (n * n)) * centered * gv[:, None, :, None]
    return out.reshape(g.shape)


def center_crop_bounds(shape, n):
    """Slices cropping ``shape`` to its largest centred multiple of ``n``."""
    slices = []
    for size in shape:
        keep = (size // n) * n
        if keep == 0:
            raise DimensionError(f"axis of length {size} is shorter than patch size {n}")
        start = (size - keep) // 2
        slices.append(slice(start, start + keep))
    return tuple(slices)


def center_crop(image, n):
    img = as_image(image)
    return img[center_crop_bounds(img.shape, n)]
