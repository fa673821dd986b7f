"""Time the numba projector kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py --size 128 --angles 180 --repeat 3
"""
import argparse
import time

import numpy as np

from eagle_ct import _accel, _kernels, phantom, tomo


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--angles", type=int, default=180)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    n = args.size
    geom = tomo.Geometry.covering(n, args.angles)
    img = phantom.shepp_logan(n)
    cos_t, sin_t = np.cos(geom.angles), np.sin(geom.angles)
    offs = geom.offsets
    half, step, count = _kernels.ray_sampling(n)
    sino = _kernels.forward_np(img, cos_t, sin_t, offs, half, step, count)
    norms = _kernels.row_norms_np(n, cos_t, sin_t, offs, half, step, count)
    order = tomo.ray_order(geom)

    cases = {
        "forward": lambda k: lambda: getattr(_kernels, f"forward_{k}")(
            img, cos_t, sin_t, offs, half, step, count),
        "backproject": lambda k: lambda: getattr(_kernels, f"backproject_{k}")(
            sino, cos_t, sin_t, 1.0, n),
        "row_norms": lambda k: lambda: getattr(_kernels, f"row_norms_{k}")(
            n, cos_t, sin_t, offs, half, step, count),
        "kaczmarz_sweep": lambda k: lambda: getattr(_kernels, f"kaczmarz_sweep_{k}")(
            np.zeros(n * n), sino, norms, order, cos_t, sin_t, offs, half, step, count, 0.25),
    }
    print(f"size {n}, {geom.num_angles} angles x {geom.num_detectors} detectors, "
          f"best of {args.repeat}")
    print(f"{'kernel':<16}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for name, make in cases.items():
        make("nb")()  # compile / load from cache outside the timing
        t_nb = best_of(make("nb"), args.repeat)
        t_np = best_of(make("np"), args.repeat)
        print(f"{name:<16}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
