"""Central finite-difference checks of the analytic loss gradients."""
import numpy as np

from . import eagle
from .eagle import EagleConfig


def relative_error(analytic, numeric, floor=1e-8):
    """Worst ``|a - n| / max(|a|, |n|)`` over components with ``|a| > floor``."""
    mask = np.abs(analytic) > floor
    if not mask.any():
        return 0.0
    denom = np.maximum(np.abs(analytic[mask]), np.abs(numeric[mask]))
    return float(np.max(np.abs(analytic[mask] - numeric[mask]) / denom))


def finite_difference_gradient(fn, x, step):
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += step
        xm[idx] -= step
        grad[idx] = (fn(xp) - fn(xm)) / (2.0 * step)
    return grad


def gradcheck_trials(size=9, trials=20, seed=0, step=1e-4, kappas=(0.1, 0.3), patch_size=3,
                     floor=1e-8):
    """Relative errors of the analytic eagle/combined gradients, one row per trial."""
    rng = np.random.default_rng(seed)
    rows = []
    for t in range(trials):
        rec = rng.random((size, size))
        gt = rng.random((size, size))
        cfg = EagleConfig(patch_size, kappas[t % len(kappas)])
        e_num = finite_difference_gradient(lambda x: eagle.eagle_loss(x, gt, cfg), rec, step)
        c_num = finite_difference_gradient(lambda x: eagle.combined_loss(x, gt, cfg).total, rec,
                                           step)
        rows.append({
            "trial": t,
            "kappa": cfg.kappa,
            "eagle_rel_err": relative_error(eagle.eagle_loss_gradient(rec, gt, cfg), e_num, floor),
            "combined_rel_err": relative_error(eagle.combined_loss_gradient(rec, gt, cfg), c_num,
                                                floor),
        })
    return rows
