"""Hot loops of the parallel-beam projector, in numba and pure-numpy flavours.

Ray model (shared by every kernel so the forward projector and the Kaczmarz
rows describe the same matrix): the ray at angle ``theta`` and signed detector
offset ``s`` is ``p(t) = s*(cos, sin) + t*(-sin, cos)``, sampled at
``t_k = -half + (k + 0.5) * step``. Each sample bilinearly interpolates the
image (zero outside) and contributes ``value * step``. Pixel ``[r, c]`` of an
``N x N`` image sits at ``x = c - (N-1)/2``, ``y = (N-1)/2 - r``.

The ``*_nb`` functions are numba-compiled; the ``*_np`` functions are the
vectorized numpy fallback. Public dispatch happens in :mod:`eagle_ct.tomo`.
"""
import math

import numpy as np

from ._accel import njit, prange


def ray_sampling(size):
    """``(half_length, step, num_samples)`` covering an ``size x size`` image."""
    half = size * math.sqrt(2.0) / 2.0 + 1.0
    count = int(math.ceil(2.0 * half / 0.5))
    return half, 2.0 * half / count, count


# ----------------------------------------------------------------------------
# numba kernels
# ----------------------------------------------------------------------------

@njit(parallel=True)
def forward_nb(image, cos_t, sin_t, offsets, half, step, count):
    n = image.shape[0]
    na = cos_t.shape[0]
    nd = offsets.shape[0]
    centre = 0.5 * (n - 1)
    out = np.zeros((na, nd))
    for ray in prange(na * nd):
        a = ray // nd
        d = ray % nd
        c, s = cos_t[a], sin_t[a]
        ox, oy = offsets[d] * c, offsets[d] * s
        acc = 0.0
        for k in range(count):
            t = -half + (k + 0.5) * step
            col = ox - t * s + centre
            row = centre - (oy + t * c)
            c0 = math.floor(col)
            r0 = math.floor(row)
            if c0 < -1 or c0 >= n or r0 < -1 or r0 >= n:
                continue
            fc = col - c0
            fr = row - r0
            ic0 = int(c0)
            ir0 = int(r0)
            for dr in range(2):
                ir = ir0 + dr
                if ir < 0 or ir >= n:
                    continue
                wr = fr if dr else 1.0 - fr
                for dc in range(2):
                    ic = ic0 + dc
                    if ic < 0 or ic >= n:
                        continue
                    wc = fc if dc else 1.0 - fc
                    acc += wr * wc * image[ir, ic]
        out[a, d] = acc * step
    return out


@njit(parallel=True)
def backproject_nb(filtered, cos_t, sin_t, spacing, size):
    na, nd = filtered.shape
    centre = 0.5 * (size - 1)
    det_centre = 0.5 * (nd - 1)
    out = np.zeros((size, size))
    for p in prange(size * size):
        r = p // size
        col = p % size
        x = col - centre
        y = centre - r
        acc = 0.0
        for a in range(na):
            u = (x * cos_t[a] + y * sin_t[a]) / spacing + det_centre
            i0 = math.floor(u)
            if i0 < -1 or i0 >= nd:
                continue
            f = u - i0
            i = int(i0)
            if i >= 0:
                acc += (1.0 - f) * filtered[a, i]
            if i + 1 < nd:
                acc += f * filtered[a, i + 1]
        out[r, col] = acc
    return out


@njit
def _ray_footprint(n, c, s, offset, half, step, count, idx, wts):
    """Fill ``idx``/``wts`` with the (unmerged) footprint; return its length."""
    centre = 0.5 * (n - 1)
    ox, oy = offset * c, offset * s
    m = 0
    for k in range(count):
        t = -half + (k + 0.5) * step
        col = ox - t * s + centre
        row = centre - (oy + t * c)
        c0 = math.floor(col)
        r0 = math.floor(row)
        if c0 < -1 or c0 >= n or r0 < -1 or r0 >= n:
            continue
        fc = col - c0
        fr = row - r0
        ic0 = int(c0)
        ir0 = int(r0)
        for dr in range(2):
            ir = ir0 + dr
            if ir < 0 or ir >= n:
                continue
            wr = fr if dr else 1.0 - fr
            for dc in range(2):
                ic = ic0 + dc
                if ic < 0 or ic >= n:
                    continue
                wc = fc if dc else 1.0 - fc
                idx[m] = ir * n + ic
                wts[m] = wr * wc * step
                m += 1
    return m


@njit
def row_norms_nb(n, cos_t, sin_t, offsets, half, step, count):
    na = cos_t.shape[0]
    nd = offsets.shape[0]
    idx = np.empty(4 * count, np.int64)
    wts = np.empty(4 * count)
    dense = np.zeros(n * n)
    out = np.zeros((na, nd))
    for a in range(na):
        for d in range(nd):
            m = _ray_footprint(n, cos_t[a], sin_t[a], offsets[d], half, step, count, idx, wts)
            for j in range(m):
                dense[idx[j]] += wts[j]
            acc = 0.0
            for j in range(m):
                v = dense[idx[j]]
                acc += v * v
                dense[idx[j]] = 0.0
            out[a, d] = acc
    return out


@njit
def kaczmarz_sweep_nb(x, sino, norms, order, cos_t, sin_t, offsets, half, step, count,
                      relaxation):
    """One in-place sweep over the rays listed in ``order`` (flat indices)."""
    n = int(math.sqrt(x.shape[0]) + 0.5)
    nd = offsets.shape[0]
    idx = np.empty(4 * count, np.int64)
    wts = np.empty(4 * count)
    for q in range(order.shape[0]):
        ray = order[q]
        a = ray // nd
        d = ray % nd
        nrm = norms[a, d]
        if nrm <= 0.0:
            continue
        m = _ray_footprint(n, cos_t[a], sin_t[a], offsets[d], half, step, count, idx, wts)
        dot = 0.0
        for j in range(m):
            dot += wts[j] * x[idx[j]]
        scale = relaxation * (sino[a, d] - dot) / nrm
        for j in range(m):
            x[idx[j]] += scale * wts[j]


# ----------------------------------------------------------------------------
# numpy fallbacks
# ----------------------------------------------------------------------------

def _footprints_np(n, c, s, offsets, half, step, count):
    """Flat pixel indices and weights for all rays of one angle.

    Returns ``(idx, wts)`` of shape ``(len(offsets), 4 * count)``; samples that
    fall outside the image carry weight 0 and index 0.
    """
    centre = 0.5 * (n - 1)
    t = -half + (np.arange(count) + 0.5) * step
    col = (offsets * c)[:, None] - t[None, :] * s + centre
    row = centre - ((offsets * s)[:, None] + t[None, :] * c)
    c0 = np.floor(col)
    r0 = np.floor(row)
    fc = col - c0
    fr = row - r0
    c0 = c0.astype(np.int64)
    r0 = r0.astype(np.int64)
    idx_parts, wt_parts = [], []
    for dr in (0, 1):
        ir = r0 + dr
        wr = fr if dr else 1.0 - fr
        for dc in (0, 1):
            ic = c0 + dc
            wc = fc if dc else 1.0 - fc
            inside = (ir >= 0) & (ir < n) & (ic >= 0) & (ic < n)
            idx_parts.append(np.where(inside, ir * n + ic, 0))
            wt_parts.append(np.where(inside, wr * wc * step, 0.0))
    # interleave per sample to keep the same accumulation order as the numba path
    idx = np.stack(idx_parts, axis=-1).reshape(len(offsets), -1)
    wts = np.stack(wt_parts, axis=-1).reshape(len(offsets), -1)
    return idx, wts


def forward_np(image, cos_t, sin_t, offsets, half, step, count):
    n = image.shape[0]
    flat = image.ravel()
    out = np.zeros((cos_t.shape[0], offsets.shape[0]))
    for a in range(cos_t.shape[0]):
        idx, wts = _footprints_np(n, cos_t[a], sin_t[a], offsets, half, step, count)
        out[a] = np.sum(wts * flat[idx], axis=1)
    return out


def backproject_np(filtered, cos_t, sin_t, spacing, size):
    na, nd = filtered.shape
    centre = 0.5 * (size - 1)
    x = np.arange(size) - centre
    y = centre - np.arange(size)
    xx, yy = np.meshgrid(x, y)
    out = np.zeros((size, size))
    padded = np.zeros(nd + 2)
    for a in range(na):
        u = (xx * cos_t[a] + yy * sin_t[a]) / spacing + 0.5 * (nd - 1)
        i0 = np.floor(u)
        f = u - i0
        # shift by one so detector -1 and nd map onto zero padding
        i = np.clip(i0.astype(np.int64) + 1, 0, nd + 1)
        padded[1:-1] = filtered[a]
        valid = (i0 >= -1) & (i0 < nd)
        left = padded[np.clip(i, 0, nd + 1)]
        right = padded[np.clip(i + 1, 0, nd + 1)]
        out += np.where(valid, (1.0 - f) * left + f * right, 0.0)
    return out


def row_norms_np(n, cos_t, sin_t, offsets, half, step, count):
    out = np.zeros((cos_t.shape[0], offsets.shape[0]))
    for a in range(cos_t.shape[0]):
        idx, wts = _footprints_np(n, cos_t[a], sin_t[a], offsets, half, step, count)
        for d in range(offsets.shape[0]):
            merged = np.bincount(idx[d], weights=wts[d], minlength=n * n)
            out[a, d] = np.dot(merged, merged)
    return out


def kaczmarz_sweep_np(x, sino, norms, order, cos_t, sin_t, offsets, half, step, count,
                      relaxation):
    n = int(math.sqrt(x.shape[0]) + 0.5)
    nd = offsets.shape[0]
    cache = {}
    for ray in order:
        a, d = divmod(int(ray), nd)
        nrm = norms[a, d]
        if nrm <= 0.0:
            continue
        if a not in cache:
            cache.clear()
            cache[a] = _footprints_np(n, cos_t[a], sin_t[a], offsets, half, step, count)
        idx, wts = cache[a]
        i, w = idx[d], wts[d]
        dot = np.dot(w, x[i])
        # np.add.at handles repeated pixel indices within one footprint
        np.add.at(x, i, (relaxation * (sino[a, d] - dot) / nrm) * w)
