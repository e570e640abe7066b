"""Pure-numpy implementations of the hot image kernels.

Reference backend: every function here has a numba twin in
``_kernels_numba`` with identical semantics. Selected via the
SPEEDFLOW_BACKEND environment variable (see ``backend``).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "numpy"


def _sep_pass(img, k, axis, pad_mode):
    r = k.size // 2
    pad = [(0, 0), (0, 0)]
    pad[axis] = (r, r)
    padded = np.pad(img, pad, mode=pad_mode)
    windows = sliding_window_view(padded, k.size, axis=axis)
    return windows @ k


def smooth_reflect(img, k):
    """Separable convolution with symmetric 1-D kernel, mirrored borders."""
    out = _sep_pass(img, k, 1, "symmetric")
    return _sep_pass(out, k, 0, "symmetric")


def window_sum(img, k):
    """Separable correlation with zero padding (windowed sums for LK)."""
    out = _sep_pass(img, k, 1, "constant")
    return _sep_pass(out, k, 0, "constant")


def warp_bilinear(img, u, v):
    """Sample ``img`` at (x+u, y+v) bilinearly.

    Coordinates outside the image are clamped to the nearest border pixel
    and flagged in the returned out-of-bounds mask.
    """
    h, w = img.shape
    ys, xs = np.mgrid[0:h, 0:w]
    sx = xs + u
    sy = ys + v
    oob = (sx < 0.0) | (sx > w - 1.0) | (sy < 0.0) | (sy > h - 1.0)
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = sx - x0
    fy = sy - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy, oob


def resample_bilinear(img, out_h, out_w, sy, sx):
    """Resample onto an ``out_h`` x ``out_w`` grid with scale (sy, sx).

    Output pixel (i, j) samples the input at ((i+0.5)*sy-0.5,
    (j+0.5)*sx-0.5), clamped to the image. The mapping is separable, so
    the interpolation runs as two 1-D passes.
    """
    h, w = img.shape
    cy = np.clip((np.arange(out_h) + 0.5) * sy - 0.5, 0.0, h - 1.0)
    cx = np.clip((np.arange(out_w) + 0.5) * sx - 0.5, 0.0, w - 1.0)
    y0 = np.floor(cy).astype(np.intp)
    x0 = np.floor(cx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (cy - y0)[:, None]
    fx = (cx - x0)[None, :]
    top = img[np.ix_(y0, x0)] * (1.0 - fx) + img[np.ix_(y0, x1)] * fx
    bot = img[np.ix_(y1, x0)] * (1.0 - fx) + img[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bot * fy
