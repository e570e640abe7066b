"""Numba-compiled twins of the kernels in ``_kernels_numpy``.

Loops over pixels dominate the running time of the flow estimators;
these versions compile once (on-disk cache) and release the GIL so
per-level work can overlap across threads.
"""

import numpy as np
from numba import njit

NAME = "numba"

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _mirror(i, n):
    # symmetric reflection including the edge sample: -1 -> 0, n -> n-1
    if i < 0:
        i = -i - 1
    if i >= n:
        i = 2 * n - i - 1
    return i


@njit(**_JIT)
def _sep_rows_reflect(img, k, out):
    h, w = img.shape
    r = k.size // 2
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for t in range(k.size):
                acc += img[y, _mirror(x + t - r, w)] * k[t]
            out[y, x] = acc


@njit(**_JIT)
def _sep_cols_reflect(img, k, out):
    h, w = img.shape
    r = k.size // 2
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for t in range(k.size):
                acc += img[_mirror(y + t - r, h), x] * k[t]
            out[y, x] = acc


@njit(**_JIT)
def smooth_reflect(img, k):
    tmp = np.empty_like(img)
    out = np.empty_like(img)
    _sep_rows_reflect(img, k, tmp)
    _sep_cols_reflect(tmp, k, out)
    return out


@njit(**_JIT)
def _sep_rows_zero(img, k, out):
    h, w = img.shape
    r = k.size // 2
    for y in range(h):
        for x in range(w):
            acc = 0.0
            lo = max(0, r - x)
            hi = min(k.size, w - x + r)
            for t in range(lo, hi):
                acc += img[y, x + t - r] * k[t]
            out[y, x] = acc


@njit(**_JIT)
def _sep_cols_zero(img, k, out):
    h, w = img.shape
    r = k.size // 2
    for y in range(h):
        for x in range(w):
            acc = 0.0
            lo = max(0, r - y)
            hi = min(k.size, h - y + r)
            for t in range(lo, hi):
                acc += img[y + t - r, x] * k[t]
            out[y, x] = acc


@njit(**_JIT)
def window_sum(img, k):
    tmp = np.empty_like(img)
    out = np.empty_like(img)
    _sep_rows_zero(img, k, tmp)
    _sep_cols_zero(tmp, k, out)
    return out


@njit(**_JIT)
def warp_bilinear(img, u, v):
    h, w = img.shape
    out = np.empty_like(img)
    oob = np.zeros((h, w), dtype=np.bool_)
    for y in range(h):
        for x in range(w):
            sx = x + u[y, x]
            sy = y + v[y, x]
            if sx < 0.0 or sx > w - 1.0 or sy < 0.0 or sy > h - 1.0:
                oob[y, x] = True
                sx = min(max(sx, 0.0), w - 1.0)
                sy = min(max(sy, 0.0), h - 1.0)
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = sx - x0
            fy = sy - y0
            top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
            out[y, x] = top * (1.0 - fy) + bot * fy
    return out, oob


@njit(**_JIT)
def resample_bilinear(img, out_h, out_w, sy, sx):
    h, w = img.shape
    out = np.empty((out_h, out_w), dtype=img.dtype)
    for i in range(out_h):
        cy = (i + 0.5) * sy - 0.5
        cy = min(max(cy, 0.0), h - 1.0)
        y0 = int(np.floor(cy))
        y1 = min(y0 + 1, h - 1)
        fy = cy - y0
        for j in range(out_w):
            cx = (j + 0.5) * sx - 0.5
            cx = min(max(cx, 0.0), w - 1.0)
            x0 = int(np.floor(cx))
            x1 = min(x0 + 1, w - 1)
            fx = cx - x0
            top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
            bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
            out[i, j] = top * (1.0 - fy) + bot * fy
    return out
