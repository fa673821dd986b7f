"""Trainable-filter FBP: a cosine-series reconstruction filter learned by
gradient descent on the MSE + spectral-edge objective, plus the cutoff sweep.

The reconstruction is linear in the filter coefficients, so the exact
coefficient gradient is an inner product of the image-space loss gradient with
per-coefficient basis reconstructions, precomputed once per training sample.
"""
from dataclasses import dataclass, field, replace
import logging

import numpy as np

from . import metrics
from .eagle import EagleConfig, combined_loss, combined_loss_gradient
from .errors import ConfigurationError, ParameterError
from .tomo import Sinogram, detector_frequencies, filtered_backprojection

log = logging.getLogger(__name__)

DEFAULT_NUM_COEFFS = 63


@dataclass
class FilterCoefficients:
    coeffs: np.ndarray
    num_detectors: int
    detector_spacing: float = 1.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=np.float64))
        if c.ndim != 1 or c.size < 1:
            raise ParameterError("need at least one filter coefficient")
        if not np.all(np.isfinite(c)):
            raise ParameterError("filter coefficients must be finite")
        self.coeffs = c


def cosine_basis(num_detectors, num_coeffs, spacing=1.0):
    """Matrix ``[bins, num_coeffs]`` of ``cos(pi * k * f / f_max)``."""
    f = detector_frequencies(num_detectors, spacing)
    k = np.arange(num_coeffs)
    return np.cos(np.pi * np.outer(f / f[-1], k))


def filter_response(fc):
    """Frequency response on the non-negative detector-frequency bins."""
    basis = cosine_basis(fc.num_detectors, fc.coeffs.size, fc.detector_spacing)
    return basis @ fc.coeffs


def ramp_coefficients(num_detectors, num_coeffs=DEFAULT_NUM_COEFFS, spacing=1.0):
    """Least-squares cosine-series fit of ``|f|``."""
    basis = cosine_basis(num_detectors, num_coeffs, spacing)
    target = np.abs(detector_frequencies(num_detectors, spacing))
    coeffs, *_ = np.linalg.lstsq(basis, target, rcond=None)
    return FilterCoefficients(coeffs, num_detectors, spacing)


def _check(sino, geom, fc):
    if not isinstance(sino, Sinogram):
        sino = Sinogram(geom, sino)
    if fc.num_detectors != geom.num_detectors:
        raise ConfigurationError(
            f"filter built for {fc.num_detectors} detectors, geometry has {geom.num_detectors}")
    return sino


def tf_fbp_reconstruct(sino, geom, fc, out_size):
    sino = _check(sino, geom, fc)
    return filtered_backprojection(sino.values, geom, filter_response(fc), out_size)


def basis_reconstructions(sino, geom, num_coeffs, out_size, spacing=1.0):
    """Reconstruction for each unit coefficient vector, shape ``(P, N, N)``."""
    values = sino.values if isinstance(sino, Sinogram) else np.asarray(sino, dtype=np.float64)
    basis = cosine_basis(geom.num_detectors, num_coeffs, spacing)
    out = np.empty((num_coeffs, out_size, out_size))
    for k in range(num_coeffs):
        out[k] = filtered_backprojection(values, geom, basis[:, k], out_size)
    return out


@dataclass
class TrainingSample:
    sinogram: Sinogram
    ground_truth: np.ndarray
    basis: np.ndarray = field(repr=False)


def prepare_dataset(dataset, num_coeffs, spacing=1.0):
    if not dataset:
        raise ConfigurationError("training needs at least one (sinogram, image) pair")
    prepared = []
    geom = None
    for sino, gt in dataset:
        gt = np.asarray(gt, dtype=np.float64)
        if geom is None:
            geom = sino.geometry
        elif sino.geometry != geom:
            raise ConfigurationError("all training sinograms must share one geometry")
        prepared.append(TrainingSample(sino, gt, basis_reconstructions(
            sino, geom, num_coeffs, gt.shape[0], spacing)))
    return prepared


def loss_and_gradient(coeffs, samples, cfg):
    """Mean loss breakdown and coefficient gradient over the samples."""
    total = mse = eag = 0.0
    grad = np.zeros_like(coeffs)
    for s in samples:
        rec = np.tensordot(coeffs, s.basis, axes=1)
        b = combined_loss(rec, s.ground_truth, cfg)
        total += b.total
        mse += b.mse_term
        eag += b.eagle_term
        g_img = combined_loss_gradient(rec, s.ground_truth, cfg)
        grad += np.tensordot(s.basis, g_img, axes=2)
    m = len(samples)
    return total / m, mse / m, eag / m, grad / m


def _loss_only(coeffs, samples, cfg):
    return sum(combined_loss(np.tensordot(coeffs, s.basis, axes=1), s.ground_truth, cfg).total
               for s in samples) / len(samples)


class _Adam:
    def __init__(self, size, beta1=0.9, beta2=0.99, eps=1e-8):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def direction(self, grad):
        """Bias-corrected step direction; moments are only committed by :meth:`commit`."""
        t = self.t + 1
        m = self.beta1 * self.m + (1 - self.beta1) * grad
        v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        self._pending = (t, m, v)
        m_hat = m / (1 - self.beta1 ** t)
        v_hat = v / (1 - self.beta2 ** t)
        return m_hat / (np.sqrt(v_hat) + self.eps)

    def commit(self):
        self.t, self.m, self.v = self._pending

    def reset(self):
        self.m[:] = 0.0
        self.v[:] = 0.0
        self.t = 0


def mse_hessian(samples):
    """Constant Hessian of the mean MSE term with respect to the coefficients."""
    p = samples[0].basis.shape[0]
    h = np.zeros((p, p))
    for s in samples:
        b = s.basis.reshape(p, -1)
        h += (2.0 / b.shape[1]) * (b @ b.T)
    h /= len(samples)
    # tiny ridge keeps the solve well posed when basis images are collinear
    h[np.diag_indices(p)] += 1e-10 * np.trace(h) / p
    return h


OPTIMIZERS = ("newton-mse", "adam", "gd")


def train_filter(dataset, cfg=EagleConfig(), epochs=20, learning_rate=0.5,
                 num_coeffs=DEFAULT_NUM_COEFFS, initial=None, optimizer="newton-mse",
                 max_halvings=30):
    """Full-batch descent on the mean combined loss over ``dataset``.

    ``dataset`` is a sequence of ``(Sinogram, image)`` pairs sharing one
    geometry, or the output of :func:`prepare_dataset`. ``optimizer``:

    * ``"newton-mse"``: gradient preconditioned by the (constant) Hessian of
      the MSE term; ``learning_rate=1`` is an exact step for pure MSE.
    * ``"adam"``: beta1 0.9, beta2 0.99; moments reset after a rejected step.
    * ``"gd"``: plain gradient descent.

    A step that would raise the loss is retried at half the learning rate,
    and the halved rate is kept, so the loss never increases across epochs.

    Returns the learned :class:`FilterCoefficients` and a log of dicts with
    keys ``epoch, total, mse, eagle, learning_rate``; epoch 0 is the start.
    """
    if int(epochs) != epochs or epochs < 1:
        raise ParameterError(f"epochs must be a positive integer, got {epochs!r}")
    if not learning_rate >= 0:
        raise ParameterError(f"learning_rate must be >= 0, got {learning_rate!r}")
    if optimizer not in OPTIMIZERS:
        raise ParameterError(f"optimizer must be one of {OPTIMIZERS}, got {optimizer!r}")
    if not dataset:
        raise ConfigurationError("training needs at least one (sinogram, image) pair")
    if isinstance(dataset[0], TrainingSample):
        samples = dataset
    else:
        count = num_coeffs if initial is None else initial.coeffs.size
        samples = prepare_dataset(dataset, count, dataset[0][0].geometry.detector_spacing)
    geom = samples[0].sinogram.geometry
    num_coeffs = samples[0].basis.shape[0]
    if initial is None:
        initial = ramp_coefficients(geom.num_detectors, num_coeffs, geom.detector_spacing)
    if initial.coeffs.size != num_coeffs:
        raise ConfigurationError("initial coefficient count does not match the prepared basis")
    coeffs = initial.coeffs.copy()
    lr = float(learning_rate)
    adam = _Adam(num_coeffs) if optimizer == "adam" else None
    hessian = mse_hessian(samples) if optimizer == "newton-mse" else None

    total, mse, eag, grad = loss_and_gradient(coeffs, samples, cfg)
    history = [dict(epoch=0, total=total, mse=mse, eagle=eag, learning_rate=lr)]
    for epoch in range(1, int(epochs) + 1):
        accepted = False
        for _ in range(max_halvings + 1):
            if lr == 0.0:
                break
            if adam:
                direction = adam.direction(grad)
            elif hessian is not None:
                direction = np.linalg.solve(hessian, grad)
            else:
                direction = grad
            trial = coeffs - lr * direction
            if _loss_only(trial, samples, cfg) <= total:
                accepted = True
                break
            lr *= 0.5
            if adam:
                # stale momentum can point uphill; restart from the raw gradient
                adam.reset()
        if accepted:
            coeffs = trial
            if adam:
                adam.commit()
            total, mse, eag, grad = loss_and_gradient(coeffs, samples, cfg)
        history.append(dict(epoch=epoch, total=total, mse=mse, eagle=eag, learning_rate=lr))
        log.info("epoch %d total %.6g mse %.6g eagle %.6g lr %.3g", epoch, total, mse, eag, lr)
    return FilterCoefficients(coeffs, geom.num_detectors, geom.detector_spacing), history


@dataclass
class AblationRow:
    kappa: float
    coefficients: FilterCoefficients
    response: np.ndarray
    psnr: float
    ssim: float
    hf_energy: float
    history: list


def evaluate_filter(fc, samples):
    """Mean PSNR, SSIM and high-frequency energy fraction over ``samples``."""
    p = s_ = hf = 0.0
    for s in samples:
        rec = np.tensordot(fc.coeffs, s.basis, axes=1)
        rng = metrics.default_range(s.ground_truth)
        p += metrics.psnr(rec, s.ground_truth, rng)
        s_ += metrics.ssim(rec, s.ground_truth, rng)
        hf += metrics.high_frequency_energy(rec)
    m = len(samples)
    return p / m, s_ / m, hf / m


def kappa_ablation(dataset, kappa_values, epochs=20, learning_rate=0.5, cfg=EagleConfig(),
                   num_coeffs=DEFAULT_NUM_COEFFS, optimizer="newton-mse"):
    """Train one filter per cutoff value from the same start and data."""
    kappas = [float(k) for k in kappa_values]
    if not kappas:
        raise ParameterError("kappa ablation needs at least one kappa value")
    samples = dataset if dataset and isinstance(dataset[0], TrainingSample) else None
    if samples is None:
        if not dataset:
            raise ConfigurationError("training needs at least one (sinogram, image) pair")
        samples = prepare_dataset(dataset, num_coeffs, dataset[0][0].geometry.detector_spacing)
    rows = []
    for kappa in kappas:
        fc, history = train_filter(samples, replace(cfg, kappa=kappa), epochs, learning_rate,
                                   optimizer=optimizer)
        p, s, hf = evaluate_filter(fc, samples)
        rows.append(AblationRow(kappa, fc, filter_response(fc), p, s, hf, history))
        log.info("kappa %.3g: psnr %.3f ssim %.4f hf %.5f", kappa, p, s, hf)
    return rows


def high_frequency_trend_ok(rows, tolerance=0.02):
    """True when HF energy is nondecreasing in kappa, allowing one adjacent
    violation of at most ``tolerance`` relative drop."""
    ordered = sorted(rows, key=lambda r: r.kappa)
    violations = 0
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.hf_energy < prev.hf_energy:
            violations += 1
            if (prev.hf_energy - cur.hf_energy) > tolerance * abs(prev.hf_energy):
                return False
    return violations <= 1
