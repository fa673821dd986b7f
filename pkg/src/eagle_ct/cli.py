"""Command-line driver: ``eagle-ct <subcommand>``.

Usage errors exit with status 2 (click's convention); runtime failures exit
with status 1 and a single-line diagnostic on stderr.
"""
import functools
import logging
import re
import sys
from pathlib import Path

import click
import numpy as np

from . import _accel, eagle, experiments, gradcheck, io_formats, metrics, phantom, tffilter, tomo
from .eagle import EagleConfig

log = logging.getLogger("eagle_ct")

_SPACING_RE = re.compile(r"detector_spacing=([0-9.eE+-]+)")

SEED = click.IntRange(0, 2 ** 64 - 1)
NONNEG = click.FloatRange(min=0.0)
POSITIVE = click.FloatRange(min=0.0, min_open=True)


def _fail_cleanly(fn):
    """Turn library exceptions into one-line diagnostics with exit status 1."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.exceptions.ClickException:
            raise
        except (ValueError, OSError, np.linalg.LinAlgError) as exc:
            msg = " ".join(str(exc).split()) or type(exc).__name__
            click.echo(f"error: {msg}", err=True)
            sys.exit(1)
    return wrapper


def eagle_options(fn):
    fn = click.option("--center-crop", is_flag=True,
                      help="Crop to the largest centred multiple of --n before the loss.")(fn)
    fn = click.option("--lambda", "lambda_weight", type=NONNEG, default=1e-3, show_default=True,
                      help="Weight of the spectral edge loss in the combined objective.")(fn)
    fn = click.option("--kappa", type=NONNEG, default=EagleConfig.kappa, show_default=True,
                      help="High-pass cutoff, cycles per variance-map sample.")(fn)
    fn = click.option("--n", "patch_size", type=click.IntRange(min=1), default=3,
                      show_default=True, help="Patch size for the variance map.")(fn)
    return fn


def dataset_options(fn):
    opts = [
        click.option("--samples", type=click.IntRange(min=1), default=8, show_default=True,
                     help="Number of random phantoms in the training set."),
        click.option("--size", type=click.IntRange(min=32), default=128, show_default=True),
        click.option("--angles", type=click.IntRange(min=1), default=180, show_default=True),
        click.option("--detector-spacing", type=POSITIVE, default=1.0, show_default=True),
        click.option("--noise-sigma", type=NONNEG, default=0.01, show_default=True,
                     help="Gaussian noise sigma added to each sinogram."),
        click.option("--noise-mode", type=click.Choice(["relative", "absolute"]),
                     default="relative", show_default=True,
                     help="relative: sigma is a fraction of the sinogram maximum."),
        click.option("--seed", type=SEED, default=0, show_default=True),
        click.option("--coeffs", "num_coeffs", type=click.IntRange(min=1), default=63,
                     show_default=True, help="Number of cosine-series filter coefficients."),
        click.option("--optimizer", type=click.Choice(tffilter.OPTIMIZERS),
                     default="newton-mse", show_default=True),
        click.option("--epochs", type=click.IntRange(min=1), default=20, show_default=True),
        click.option("--lr", type=NONNEG, default=0.5, show_default=True),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def main(verbose):
    """Spectral edge loss experiments for parallel-beam CT."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    _accel.apply_thread_cap()


@main.command()
@click.option("--rec", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gt", type=click.Path(exists=True, dir_okay=False), required=True)
@eagle_options
@_fail_cleanly
def loss(rec, gt, patch_size, kappa, lambda_weight, center_crop):
    """Print the combined-loss breakdown of REC against GT as CSV."""
    cfg = EagleConfig(patch_size, kappa, lambda_weight, center_crop)
    a = io_formats.read_image(rec).astype(np.float64)
    b = io_formats.read_image(gt).astype(np.float64)
    br = eagle.combined_loss(a, b, cfg)
    io_formats.write_csv(sys.stdout, ["total", "mse", "eagle"], [br.as_row()])


@main.command("gradcheck")
@click.option("--size", type=click.IntRange(min=3), default=9, show_default=True)
@click.option("--trials", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--seed", type=SEED, default=0, show_default=True)
@click.option("--step", type=POSITIVE, default=1e-4, show_default=True)
@click.option("--tol", type=POSITIVE, default=1e-4, show_default=True)
@_fail_cleanly
def gradcheck_cmd(size, trials, seed, step, tol):
    """Check analytic gradients against central finite differences."""
    rows = gradcheck.gradcheck_trials(size, trials, seed, step)
    for r in rows:
        r["pass"] = int(r["eagle_rel_err"] < tol and r["combined_rel_err"] < tol)
    io_formats.write_csv(sys.stdout, ["trial", "kappa", "eagle_rel_err", "combined_rel_err",
                                      "pass"], rows)
    if not all(r["pass"] for r in rows):
        sys.exit(1)


def _sidecar_name(path, tag):
    p = Path(path)
    return str(p.with_name(f"{p.stem}.{tag}{p.suffix or '.f32'}"))


def _sino_description(geom):
    return (f"parallel-beam sinogram angles={geom.num_angles} detectors={geom.num_detectors} "
            f"detector_spacing={geom.detector_spacing!r}")


@main.command()
@click.option("--phantom", "phantom_kind", type=click.Choice(["shepp", "random"]),
              default="shepp", show_default=True)
@click.option("--size", type=click.IntRange(min=32), default=128, show_default=True)
@click.option("--angles", type=click.IntRange(min=1), default=180, show_default=True)
@click.option("--detectors", type=click.IntRange(min=1), default=None,
              help="Detector count (default: covers the image diagonal).")
@click.option("--detector-spacing", type=POSITIVE, default=1.0, show_default=True)
@click.option("--num-ellipses", type=click.IntRange(min=1), default=8, show_default=True)
@click.option("--noise-sigma", type=NONNEG, default=0.0, show_default=True)
@click.option("--noise-mode", type=click.Choice(["relative", "absolute"]), default="absolute",
              show_default=True, help="relative: sigma is a fraction of the sinogram maximum.")
@click.option("--seed", type=SEED, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="Sinogram output; the phantom goes to <stem>.phantom<suffix>.")
@click.option("--fbp-out", type=click.Path(dir_okay=False), default=None,
              help="Also write the ramp FBP reconstruction here.")
@_fail_cleanly
def simulate(phantom_kind, size, angles, detectors, detector_spacing, num_ellipses, noise_sigma,
             noise_mode, seed, out, fbp_out):
    """Project a phantom and write the (noisy) sinogram and the phantom."""
    seq = np.random.SeedSequence(seed)
    phantom_seed, noise_seed = (int(s) for s in seq.generate_state(2))
    if phantom_kind == "shepp":
        gt = phantom.shepp_logan(size)
    else:
        gt = phantom.random_phantom(size, num_ellipses, phantom_seed)
    if detectors is None:
        geom = tomo.Geometry.covering(size, angles, detector_spacing)
    else:
        geom = tomo.Geometry(angles, detectors, detector_spacing)
    sino = experiments.simulate(gt, geom, noise_sigma, noise_seed, noise_mode == "relative")
    io_formats.write_image(out, sino.values, _sino_description(geom))
    io_formats.write_image(_sidecar_name(out, "phantom"), gt, f"{phantom_kind} phantom")
    if fbp_out:
        io_formats.write_image(fbp_out, tomo.fbp_reconstruct(sino, geom, size), "ramp FBP")


def _load_sinogram(path, spacing=None):
    values = io_formats.read_image(path).astype(np.float64)
    if spacing is None:
        m = _SPACING_RE.search(io_formats.read_header(path).description)
        spacing = float(m.group(1)) if m else 1.0
    geom = tomo.Geometry(values.shape[0], values.shape[1], spacing)
    return tomo.Sinogram(geom, values)


METRIC_FIELDS = ["method", "reg", "reg_weight", "psnr_db", "ssim", "data_range", "hf_energy"]


@main.command()
@click.option("--sino", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--method", type=click.Choice(["fbp", "art"]), default="fbp", show_default=True)
@click.option("--reg", type=click.Choice(list(tomo.REG_KINDS)), default="none",
              show_default=True)
@click.option("--reg-weight", type=NONNEG, default=0.0, show_default=True)
@click.option("--reg-step", type=POSITIVE, default=1.0, show_default=True)
@click.option("--sweeps", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--relaxation", type=click.FloatRange(0.0, 2.0, min_open=True, max_open=True),
              default=0.25, show_default=True)
@click.option("--nonneg", is_flag=True, help="Clamp the ART iterate to >= 0 after each sweep.")
@click.option("--shuffle-seed", type=SEED, default=None,
              help="Randomize the ray order with this seed (default: fixed order).")
@eagle_options
@click.option("--size", type=click.IntRange(min=1), default=None,
              help="Output size (default: the ground truth's, else 128).")
@click.option("--detector-spacing", type=POSITIVE, default=None,
              help="Override the spacing recorded in the sinogram header.")
@click.option("--reference", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Eagle reference image (default: FBP of the input sinogram).")
@click.option("--gt", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Ground truth for the metric report.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--metrics-out", type=click.Path(dir_okay=False), default=None)
@click.option("--log-out", type=click.Path(dir_okay=False), default=None,
              help="Per-sweep ART log (CSV).")
@_fail_cleanly
def reconstruct(sino, method, reg, reg_weight, reg_step, sweeps, relaxation, nonneg,
                shuffle_seed, patch_size, kappa, lambda_weight, center_crop, size,
                detector_spacing, reference, gt, out, metrics_out, log_out):
    """Reconstruct a sinogram by FBP or (regularized) ART."""
    if metrics_out and not gt:
        raise click.UsageError("--metrics-out needs --gt")
    sinogram = _load_sinogram(sino, detector_spacing)
    geom = sinogram.geometry
    gt_img = io_formats.read_image(gt).astype(np.float64) if gt else None
    if size is None:
        size = gt_img.shape[0] if gt_img is not None else 128
    history = []
    if method == "fbp":
        if reg != "none":
            raise click.UsageError("--reg applies to --method art only")
        rec = tomo.fbp_reconstruct(sinogram, geom, size)
    else:
        cfg = tomo.ArtConfig(num_sweeps=sweeps, relaxation=relaxation, reg_kind=reg,
                             reg_weight=reg_weight, reg_step=reg_step,
                             eagle_cfg=EagleConfig(patch_size, kappa, lambda_weight, center_crop),
                             nonnegativity=nonneg, shuffle_seed=shuffle_seed)
        ref = None
        if cfg.active_reg == "eagle":
            if reference:
                ref = io_formats.read_image(reference).astype(np.float64)
            else:
                ref = tomo.fbp_reconstruct(sinogram, geom, size)
        rec, history = tomo.art_reconstruct(sinogram, geom, cfg, out_size=size, reference=ref)
    io_formats.write_image(out, rec, f"{method} reconstruction reg={reg}")
    if log_out:
        io_formats.write_csv(log_out, ["sweep", "data_residual", "reg_value"],
                             [vars(h) for h in history])
    if metrics_out:
        rep = metrics.report(rec, gt_img)
        io_formats.write_csv(metrics_out, METRIC_FIELDS, [{
            "method": method, "reg": reg if method == "art" else "none",
            "reg_weight": float(reg_weight), "psnr_db": rep.psnr_db, "ssim": rep.ssim,
            "data_range": rep.data_range, "hf_energy": metrics.high_frequency_energy(rec)}])


COMPARE_FIELDS = ["run", "reg_weight", "psnr_db", "ssim", "hf_energy", "final_residual"]


@main.command("compare-art")
@click.option("--size", type=click.IntRange(min=32), default=128, show_default=True)
@click.option("--angles", type=click.IntRange(min=1), default=45, show_default=True)
@click.option("--noise-sigma", type=NONNEG, default=0.01, show_default=True,
              help="Noise sigma as a fraction of the sinogram maximum.")
@click.option("--seed", type=SEED, default=0, show_default=True)
@click.option("--sweeps", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--relaxation", type=click.FloatRange(0.0, 2.0, min_open=True, max_open=True),
              default=0.25, show_default=True)
@click.option("--eagle-weight", type=NONNEG, default=0.1, show_default=True)
@click.option("--kappa", type=NONNEG, default=0.1, show_default=True)
@click.option("--n", "patch_size", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@_fail_cleanly
def compare_art(size, angles, noise_sigma, seed, sweeps, relaxation, eagle_weight, kappa,
                patch_size, out_dir):
    """Unregularized vs eagle-regularized vs SSIM-matched TV ART on Shepp-Logan."""
    res = experiments.art_comparison(size, angles, noise_sigma, seed, sweeps, relaxation,
                                     eagle_weight, kappa, patch_size)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for key in ("none", "eagle", "tv"):
        run = res[key]
        rows.append({"run": key, "reg_weight": float(run.weight), "psnr_db": run.psnr,
                     "ssim": run.ssim, "hf_energy": run.hf_energy,
                     "final_residual": run.history[-1].data_residual})
        io_formats.write_image(out / f"art_{key}.f32", run.image, f"ART reg={key}")
        io_formats.export_pgm(out / f"art_{key}.pgm", run.image, 0.0, 1.0)
    io_formats.write_image(out / "fbp.f32", res["fbp"], "ramp FBP (eagle reference)")
    io_formats.write_csv(out / "comparison.csv", COMPARE_FIELDS, rows)
    io_formats.write_csv(sys.stdout, COMPARE_FIELDS, rows)


def _dataset(samples, size, angles, detector_spacing, noise_sigma, noise_mode, seed):
    return experiments.random_dataset(samples, size, angles, noise_sigma, seed,
                                      detector_spacing=detector_spacing,
                                      relative=noise_mode == "relative")


def _write_response(path, fc):
    freqs = tomo.detector_frequencies(fc.num_detectors, fc.detector_spacing)
    io_formats.write_csv(path, ["frequency", "H"],
                         [{"frequency": f, "H": h} for f, h in zip(freqs, tffilter.filter_response(fc))])


LOG_FIELDS = ["epoch", "total", "mse", "eagle", "learning_rate"]


@main.command("train-filter")
@dataset_options
@eagle_options
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@_fail_cleanly
def train_filter_cmd(samples, size, angles, detector_spacing, noise_sigma, noise_mode, seed,
                     num_coeffs, optimizer, epochs, lr, patch_size, kappa, lambda_weight,
                     center_crop, out_dir):
    """Learn a cosine-series FBP filter on simulated random phantoms."""
    cfg = EagleConfig(patch_size, kappa, lambda_weight, center_crop)
    data = _dataset(samples, size, angles, detector_spacing, noise_sigma, noise_mode, seed)
    fc, history = tffilter.train_filter(data, cfg, epochs, lr, num_coeffs=num_coeffs,
                                        optimizer=optimizer)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io_formats.write_csv(out / "coefficients.csv", ["k", "coeff"],
                         [{"k": k, "coeff": c} for k, c in enumerate(fc.coeffs)])
    _write_response(out / "response.csv", fc)
    io_formats.write_csv(out / "loss_log.csv", LOG_FIELDS, history)


def _parse_kappas(ctx, param, value):
    try:
        kappas = [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from None
    if not kappas or any(k < 0 for k in kappas):
        raise click.BadParameter("need at least one non-negative kappa")
    return kappas


ABLATION_FIELDS = ["kappa", "psnr_db", "ssim", "hf_energy", "final_loss"]


@main.command("ablate-kappa")
@click.option("--kappas", callback=_parse_kappas, default="0.1,0.2,0.3,0.4",
              show_default=True)
@dataset_options
@click.option("--n", "patch_size", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--lambda", "lambda_weight", type=NONNEG, default=1e-3, show_default=True)
@click.option("--center-crop", is_flag=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@_fail_cleanly
def ablate_kappa(kappas, samples, size, angles, detector_spacing, noise_sigma, noise_mode, seed,
                 num_coeffs, optimizer, epochs, lr, patch_size, lambda_weight, center_crop,
                 out_dir):
    """Train one filter per kappa on identical data and tabulate the results."""
    cfg = EagleConfig(patch_size, kappas[0], lambda_weight, center_crop)
    data = _dataset(samples, size, angles, detector_spacing, noise_sigma, noise_mode, seed)
    prepared = tffilter.prepare_dataset(data, num_coeffs, detector_spacing)
    rows = tffilter.kappa_ablation(prepared, kappas, epochs, lr, cfg, optimizer=optimizer)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io_formats.write_csv(out / "ablation.csv", ABLATION_FIELDS, [
        {"kappa": r.kappa, "psnr_db": r.psnr, "ssim": r.ssim, "hf_energy": r.hf_energy,
         "final_loss": r.history[-1]["total"]} for r in rows])
    first = prepared[0]
    geom = first.sinogram.geometry
    for i, r in enumerate(rows):
        tag = f"{i:02d}_kappa_{r.kappa:g}"
        _write_response(out / f"response_{tag}.csv", r.coefficients)
        io_formats.write_csv(out / f"loss_log_{tag}.csv", LOG_FIELDS, r.history)
        rec = tffilter.tf_fbp_reconstruct(first.sinogram, geom, r.coefficients,
                                          first.ground_truth.shape[0])
        io_formats.write_image(out / f"recon_{tag}.f32", rec, f"TF-FBP reconstruction kappa={r.kappa!r}")
        io_formats.export_pgm(out / f"recon_{tag}.pgm", rec, 0.0, 1.0)


if __name__ == "__main__":  # pragma: no cover
    main()
