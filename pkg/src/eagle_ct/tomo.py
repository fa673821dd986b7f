"""Parallel-beam CT: forward projection, ramp-filtered FBP, and regularized ART."""
from dataclasses import dataclass, field
import logging
import math

import numpy as np

from . import _accel, _kernels
from .eagle import EagleConfig, eagle_loss, eagle_loss_gradient, tv_gradient, tv_value
from .errors import ConfigurationError, DimensionError, ParameterError
from .imagecore import as_image

log = logging.getLogger(__name__)

REG_KINDS = ("none", "tv", "eagle")


@dataclass(frozen=True)
class Geometry:
    """Parallel-beam geometry with angles evenly spaced over ``[0, pi)``."""

    num_angles: int
    num_detectors: int
    detector_spacing: float = 1.0

    def __post_init__(self):
        if int(self.num_angles) != self.num_angles or self.num_angles < 1:
            raise ParameterError(f"num_angles must be a positive integer, got {self.num_angles!r}")
        if int(self.num_detectors) != self.num_detectors or self.num_detectors < 1:
            raise ParameterError(
                f"num_detectors must be a positive integer, got {self.num_detectors!r}")
        if not self.detector_spacing > 0:
            raise ParameterError(f"detector_spacing must be > 0, got {self.detector_spacing!r}")

    @property
    def angles(self):
        return np.arange(self.num_angles) * (np.pi / self.num_angles)

    @property
    def offsets(self):
        """Signed detector-centre offsets from the rotation axis, in pixels."""
        return (np.arange(self.num_detectors) - 0.5 * (self.num_detectors - 1)) * self.detector_spacing

    @classmethod
    def covering(cls, size, num_angles, detector_spacing=1.0):
        """Smallest odd detector count spanning the image diagonal plus one
        detector of margin per side (185 for a 128-pixel image)."""
        nd = int(math.ceil(size * math.sqrt(2.0) / detector_spacing + 2.0))
        if nd % 2 == 0:
            nd += 1
        return cls(num_angles, nd, detector_spacing)


@dataclass
class Sinogram:
    geometry: Geometry
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        expected = (self.geometry.num_angles, self.geometry.num_detectors)
        if v.shape != expected:
            raise DimensionError(f"sinogram shape {v.shape} does not match geometry {expected}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sinogram contains NaN or Inf")
        self.values = v


def _trig(geom):
    a = geom.angles
    return np.cos(a), np.sin(a)


def _square(image):
    img = as_image(image)
    if img.shape[0] != img.shape[1]:
        raise DimensionError(f"projector needs a square image, got {img.shape[0]}x{img.shape[1]}")
    return img


def radon_forward(image, geom):
    """Line integrals of the bilinearly interpolated image along every ray."""
    img = _square(image)
    cos_t, sin_t = _trig(geom)
    half, step, count = _kernels.ray_sampling(img.shape[0])
    kernel = _kernels.forward_nb if _accel.USE_NUMBA else _kernels.forward_np
    vals = kernel(np.ascontiguousarray(img), cos_t, sin_t, geom.offsets, half, step, count)
    return Sinogram(geom, vals)


def padded_length(num_detectors):
    """FFT length used for detector-row filtering (power of two, >= 2 * detectors)."""
    return max(64, 1 << int(math.ceil(math.log2(2 * num_detectors))))


def ramp_response(num_detectors, spacing=1.0):
    """Real rfft-layout response of the band-limited (Ram-Lak) ramp filter.

    Built from the spatial Ram-Lak kernel so the discrete response has no DC
    deficit; it approximates ``|f|`` in cycles per pixel.
    """
    npad = padded_length(num_detectors)
    k = np.concatenate([np.arange(0, npad // 2 + 1), np.arange(npad // 2 - 1, 0, -1)])
    h = np.zeros(npad)
    h[0] = 0.25
    odd = k % 2 == 1
    h[odd] = -1.0 / (math.pi * k[odd]) ** 2
    return np.real(np.fft.rfft(h)) / spacing


def detector_frequencies(num_detectors, spacing=1.0):
    """Non-negative frequencies (cycles per pixel) matching the rfft layout."""
    return np.fft.rfftfreq(padded_length(num_detectors), d=spacing)


# Filtered rows are band-limited upsampled by this factor before the linear
# backprojection interpolates them; plain linear interpolation at the detector
# pitch costs about 1.5 dB on edge-dominated phantoms.
FBP_UPSAMPLE = 4


def filter_rows(values, response, upsample=1):
    """Filter every sinogram row by an rfft-layout frequency response.

    With ``upsample > 1`` the filtered rows are resampled by spectral zero
    padding to ``(D - 1) * upsample + 1`` points at ``1 / upsample`` of the
    detector pitch, spanning the same offsets.
    """
    v = np.asarray(values, dtype=np.float64)
    up = int(upsample)
    if up != upsample or up < 1:
        raise ParameterError(f"upsample must be a positive integer, got {upsample!r}")
    npad = 2 * (len(response) - 1)
    spec = np.fft.rfft(v, n=npad, axis=-1) * response
    if up > 1:
        # the Nyquist bin stands for +/- f_N; after zero padding it must be split
        spec[..., -1] *= 0.5
    out = np.fft.irfft(spec, n=npad * up, axis=-1)
    if up > 1:
        out *= up
    return out[..., :(v.shape[-1] - 1) * up + 1]


def backproject(filtered, geom, out_size, upsample=1):
    """Pixel-driven linear-interpolation backprojection scaled by ``pi / num_angles``.

    ``filtered`` holds rows produced by :func:`filter_rows` with the same
    ``upsample`` factor.
    """
    f = np.ascontiguousarray(filtered, dtype=np.float64)
    up = int(upsample)
    if f.shape != (geom.num_angles, (geom.num_detectors - 1) * up + 1):
        raise DimensionError(f"filtered sinogram shape {f.shape} does not match geometry")
    if int(out_size) != out_size or out_size < 1:
        raise ParameterError(f"out_size must be a positive integer, got {out_size!r}")
    cos_t, sin_t = _trig(geom)
    kernel = _kernels.backproject_nb if _accel.USE_NUMBA else _kernels.backproject_np
    img = kernel(f, cos_t, sin_t, float(geom.detector_spacing) / up, int(out_size))
    return img * (math.pi / geom.num_angles)


def filtered_backprojection(values, geom, response, out_size):
    """Filter with ``response``, upsample by :data:`FBP_UPSAMPLE`, backproject."""
    return backproject(filter_rows(values, response, FBP_UPSAMPLE), geom, out_size,
                       FBP_UPSAMPLE)


def _check_sino(sino, geom):
    if not isinstance(sino, Sinogram):
        sino = Sinogram(geom, sino)
    if sino.geometry != geom:
        raise DimensionError("sinogram geometry does not match the requested geometry")
    return sino


def fbp_reconstruct(sino, geom, out_size):
    sino = _check_sino(sino, geom)
    resp = ramp_response(geom.num_detectors, geom.detector_spacing)
    return filtered_backprojection(sino.values, geom, resp, out_size)


@dataclass(frozen=True)
class ArtConfig:
    num_sweeps: int = 20
    relaxation: float = 0.25
    reg_kind: str = "none"
    reg_weight: float = 0.0
    reg_step: float = 1.0
    eagle_cfg: EagleConfig = EagleConfig()
    nonnegativity: bool = False
    shuffle_seed: int | None = None
    min_row_norm: float = 1e-2

    def __post_init__(self):
        if int(self.num_sweeps) != self.num_sweeps or self.num_sweeps < 1:
            raise ParameterError(f"num_sweeps must be a positive integer, got {self.num_sweeps!r}")
        if not 0.0 < self.relaxation < 2.0:
            raise ParameterError(f"relaxation must lie in (0, 2), got {self.relaxation!r}")
        if self.reg_kind not in REG_KINDS:
            raise ParameterError(f"reg_kind must be one of {REG_KINDS}, got {self.reg_kind!r}")
        if not self.reg_weight >= 0:
            raise ParameterError(f"reg_weight must be >= 0, got {self.reg_weight!r}")
        if not self.reg_step > 0:
            raise ParameterError(f"reg_step must be > 0, got {self.reg_step!r}")
        if not 0 <= self.min_row_norm < 1:
            raise ParameterError(f"min_row_norm must lie in [0, 1), got {self.min_row_norm!r}")

    @property
    def active_reg(self):
        return "none" if self.reg_weight == 0 else self.reg_kind


@dataclass
class SweepRecord:
    sweep: int
    data_residual: float
    reg_value: float


def ray_order(geom, seed=None):
    """Angle-major ray order, or a seeded permutation of it."""
    order = np.arange(geom.num_angles * geom.num_detectors, dtype=np.int64)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(order)
    return order


def art_reconstruct(sino, geom, cfg, out_size=None, reference=None, initial=None):
    """Kaczmarz sweeps, each followed by one explicit regularizer gradient step.

    Rays whose squared norm is below ``cfg.min_row_norm`` times the largest
    one are skipped.

    For ``reg_kind="eagle"`` the regularizer is the spectral edge loss against
    ``reference`` (typically the FBP image of the same sinogram). Returns the
    image and a list of :class:`SweepRecord`.
    """
    sino = _check_sino(sino, geom)
    reg = cfg.active_reg
    if out_size is None:
        if reference is None:
            raise ConfigurationError("out_size is required when no reference image is given")
        out_size = np.shape(reference)[0]
    n = int(out_size)
    if reg == "eagle":
        if reference is None:
            raise ConfigurationError("eagle regularization needs a reference image")
        reference = as_image(reference, "reference")
        if reference.shape != (n, n):
            raise DimensionError(f"reference shape {reference.shape} does not match {(n, n)}")

    cos_t, sin_t = _trig(geom)
    offsets = geom.offsets
    half, step, count = _kernels.ray_sampling(n)
    if _accel.USE_NUMBA:
        norms_fn, sweep_fn = _kernels.row_norms_nb, _kernels.kaczmarz_sweep_nb
    else:
        norms_fn, sweep_fn = _kernels.row_norms_np, _kernels.kaczmarz_sweep_np
    norms = norms_fn(n, cos_t, sin_t, offsets, half, step, count)
    # corner-grazing rays have tiny norms and would amplify their noise by 1/|a|
    norms[norms < cfg.min_row_norm * norms.max()] = 0.0
    order = ray_order(geom, cfg.shuffle_seed)

    if initial is None:
        x = np.zeros(n * n)
    else:
        x = as_image(initial, "initial").ravel().copy()
    history = []
    for sweep in range(cfg.num_sweeps):
        sweep_fn(x, sino.values, norms, order, cos_t, sin_t, offsets, half, step, count,
                 float(cfg.relaxation))
        img = x.reshape(n, n)
        if reg == "tv":
            img -= cfg.reg_step * cfg.reg_weight * tv_gradient(img)
        elif reg == "eagle":
            img -= cfg.reg_step * cfg.reg_weight * eagle_loss_gradient(img, reference, cfg.eagle_cfg)
        if cfg.nonnegativity:
            np.maximum(x, 0.0, out=x)
        if reg == "tv":
            reg_value = tv_value(img)
        elif reg == "eagle":
            reg_value = eagle_loss(img, reference, cfg.eagle_cfg)
        else:
            reg_value = 0.0
        resid = radon_forward(img, geom).values - sino.values
        history.append(SweepRecord(sweep + 1, float(np.sum(resid ** 2)), float(reg_value)))
        log.debug("sweep %d residual %.6g reg %.6g", sweep + 1, history[-1].data_residual, reg_value)
    return x.reshape(n, n).copy(), history
