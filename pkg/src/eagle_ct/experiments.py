"""Reusable experiment drivers shared by the CLI and the acceptance suite."""
from dataclasses import dataclass, replace
import logging

import numpy as np

from . import metrics, phantom, tomo
from .eagle import EagleConfig

log = logging.getLogger(__name__)


def add_noise(values, sigma, rng, relative=False):
    """Additive Gaussian noise; ``relative`` scales sigma by ``max(values)``."""
    values = np.asarray(values, dtype=np.float64)
    if sigma < 0:
        raise ValueError(f"noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return values.copy()
    scale = sigma * float(values.max()) if relative else sigma
    return values + scale * rng.standard_normal(values.shape)


def simulate(image, geom, noise_sigma=0.0, seed=0, relative=True):
    rng = np.random.default_rng(seed)
    clean = tomo.radon_forward(image, geom)
    return tomo.Sinogram(geom, add_noise(clean.values, noise_sigma, rng, relative))


def random_dataset(count, size=128, num_angles=180, noise_sigma=0.01, seed=0,
                   num_ellipses=8, detector_spacing=1.0, relative=True):
    """``count`` (noisy sinogram, phantom) pairs from seeded random phantoms."""
    geom = tomo.Geometry.covering(size, num_angles, detector_spacing)
    seeds = np.random.SeedSequence(seed).generate_state(2 * count)
    out = []
    for i in range(count):
        gt = phantom.random_phantom(size, num_ellipses, seed=int(seeds[2 * i]))
        out.append((simulate(gt, geom, noise_sigma, int(seeds[2 * i + 1]), relative), gt))
    return out


@dataclass
class ArtRun:
    label: str
    weight: float
    image: np.ndarray
    ssim: float
    psnr: float
    hf_energy: float
    history: list


def run_art(sino, geom, gt, cfg, reference=None, label=None):
    img, hist = tomo.art_reconstruct(sino, geom, cfg, out_size=gt.shape[0], reference=reference)
    rng = metrics.default_range(gt)
    return ArtRun(label or cfg.active_reg, cfg.reg_weight, img, metrics.ssim(img, gt, rng),
                  metrics.psnr(img, gt, rng), metrics.high_frequency_energy(img), hist)


def match_tv_weight(sino, geom, gt, base_cfg, target_ssim, lo=0.0, hi=1e-2, iters=12):
    """Bisect the TV weight whose ART result has SSIM closest to ``target_ssim``.

    Assumes SSIM increases with the TV weight on ``[lo, hi]``.
    """
    best = None
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        run = run_art(sino, geom, gt, replace(base_cfg, reg_kind="tv", reg_weight=mid), label="tv")
        if best is None or abs(run.ssim - target_ssim) < abs(best.ssim - target_ssim):
            best = run
        if run.ssim < target_ssim:
            lo = mid
        else:
            hi = mid
    return best


def art_comparison(size=128, num_angles=45, noise_fraction=0.01, seed=0, num_sweeps=20,
                   relaxation=0.25, eagle_weight=0.1, kappa=0.1, patch_size=3):
    """Unregularized vs eagle-regularized vs SSIM-matched TV ART on Shepp-Logan.

    The eagle reference image is the ramp FBP of the same noisy sinogram.
    """
    gt = phantom.shepp_logan(size)
    geom = tomo.Geometry.covering(size, num_angles)
    sino = simulate(gt, geom, noise_fraction, seed, relative=True)
    fbp = tomo.fbp_reconstruct(sino, geom, size)
    base = tomo.ArtConfig(num_sweeps=num_sweeps, relaxation=relaxation)
    plain = run_art(sino, geom, gt, base, label="none")
    ecfg = EagleConfig(patch_size=patch_size, kappa=kappa, center_crop=True)
    eag = run_art(sino, geom, gt, replace(base, reg_kind="eagle", reg_weight=eagle_weight,
                                          eagle_cfg=ecfg), reference=fbp, label="eagle")
    tv = match_tv_weight(sino, geom, gt, base, eag.ssim)
    for r in (plain, eag, tv):
        log.info("%s w=%.4g ssim %.4f psnr %.3f hf %.5f", r.label, r.weight, r.ssim, r.psnr,
                 r.hf_energy)
    return {"none": plain, "eagle": eag, "tv": tv, "fbp": fbp, "gt": gt}
