"""Single-scale Lucas-Kanade optical flow on a frame pair.

Per pixel, the translation minimizing the weighted brightness-constancy
residual over a Gaussian-weighted window is obtained from the closed-form
2x2 normal equations. The estimate is refined iteratively: each pass warps
the second frame back by the running flow and accumulates the incremental
solution, which yields sub-pixel accuracy and extends the usable range a
little beyond one window radius. Pixels whose structure tensor is nearly
rank-deficient (smaller eigenvalue below the threshold), or whose window
reads clamped out-of-bounds samples during any warp, are marked invalid
rather than reported as numbers.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import FileFormatError


@dataclass(frozen=True)
class LKParams:
    """Window diameter (odd), Gaussian weight std, refinement iterations
    and the validity gates on the structure tensor's smaller eigenvalue.

    ``eig_threshold`` must sit above the gradient noise floor of the
    imagery (about 0.3 * sigma_noise^2 per tensor entry) so featureless
    windows never pass. ``min_content_ratio`` is the fraction of the
    reference window's eigenvalue that the warped window must retain at
    every iteration; it rejects pixels still seeing only the faint fringe
    of a pattern that has mostly moved on, independent of absolute
    gradient strength.
    """

    window: int = 9
    weight_sigma: float = 2.4
    iterations: int = 8
    step_tolerance: float = 0.02
    eig_threshold: float = 1.6e-3
    min_content_ratio: float = 0.4
    max_residual: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise ValueError("window diameter must be odd and at least 3")
        if self.weight_sigma <= 0:
            raise ValueError("weight sigma must be positive")
        if self.iterations < 1:
            raise ValueError("at least one iteration is required")
        if self.step_tolerance < 0:
            raise ValueError("step tolerance must be non-negative")
        if self.eig_threshold < 0:
            raise ValueError("eigenvalue threshold must be non-negative")
        if not 0.0 <= self.min_content_ratio < 1.0:
            raise ValueError("content retention ratio must lie in [0, 1)")
        if self.max_residual <= 0:
            raise ValueError("residual bound must be positive")

    def weight_kernel(self):
        # 1-D factor of the squared window weights W^2, normalized so the
        # separable 2-D kernel sums to one (tensor entries become means).
        r = self.window // 2
        xs = np.arange(-r, r + 1, dtype=np.float64)
        w = np.exp(-(xs * xs) / (2.0 * self.weight_sigma**2))
        w2 = w * w
        return w2 / w2.sum()


@dataclass
class FlowField:
    """Dense per-pixel velocities (u, v) in pixels/frame plus validity."""

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray

    @property
    def shape(self):
        return self.u.shape

    def speed(self):
        return np.hypot(self.u, self.v)

    @classmethod
    def zeros(cls, shape):
        return cls(
            u=np.zeros(shape), v=np.zeros(shape), valid=np.ones(shape, dtype=bool)
        )


def spatial_gradient(frame):
    """Central-difference gradients (gx, gy); one-sided at the borders."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[0] < 3 or frame.shape[1] < 3:
        raise ValueError("frame must be at least 3x3 for gradients")
    gy, gx = np.gradient(frame)
    return gx, gy


def warp(frame, flow):
    """Resample ``frame`` at (x+u, y+v).

    ``flow`` is either a uniform (u, v) pair or a FlowField / (u, v) array
    pair of matching shape. Returns the warped frame and the mask of
    pixels whose source coordinate fell outside the image (those take the
    nearest border value).
    """
    frame = np.ascontiguousarray(frame, dtype=np.float64)
    if isinstance(flow, FlowField):
        u, v = flow.u, flow.v
    else:
        u, v = flow
    u = np.ascontiguousarray(np.broadcast_to(np.asarray(u, dtype=np.float64), frame.shape))
    v = np.ascontiguousarray(np.broadcast_to(np.asarray(v, dtype=np.float64), frame.shape))
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError("flow used for warping must be finite")
    return kernels.warp_bilinear(frame, u, v)


def _box_dilate(mask, radius):
    if not mask.any():
        return mask
    k = np.ones(2 * radius + 1, dtype=np.float64)
    return kernels.window_sum(mask.astype(np.float64), k) > 0.0


def _min_eigenvalue(gx, gy, k):
    txx = kernels.window_sum(gx * gx, k)
    txy = kernels.window_sum(gx * gy, k)
    tyy = kernels.window_sum(gy * gy, k)
    lam = 0.5 * (txx + tyy) - np.sqrt(0.25 * (txx - tyy) ** 2 + txy * txy)
    return lam, txx, txy, tyy


def lk_flow(prev, nxt, params=LKParams(), init=None):
    """Dense Lucas-Kanade flow from ``prev`` to ``nxt``.

    ``init`` seeds the iterative refinement with an existing flow field
    (used by the coarse-to-fine estimator); its invalid pixels stay
    invalid in the result.

    The normal equations are built from the gradients of ``prev``, so the
    solve itself does not depend on the motion. Validity combines four
    gates: the prev-frame structure tensor must be invertible above the
    eigenvalue threshold; the window must never overlap warped
    out-of-bounds samples; at every iteration the warped second frame
    must retain a fraction of the reference window's structure (when the
    tracked pattern has mostly moved on, the warped content is
    comparatively featureless and the pixel is dropped instead of
    reporting a confidently wrong vector); and after the last iteration
    the windowed residual, normalized by the tensor trace so it reads as
    a squared displacement error, must certify that the solve actually
    converged onto matching structure.
    """
    prev = np.ascontiguousarray(prev, dtype=np.float64)
    nxt = np.ascontiguousarray(nxt, dtype=np.float64)
    if prev.shape != nxt.shape:
        raise ValueError("frame pair must share dimensions")
    if min(prev.shape) < params.window:
        raise ValueError("frames must be at least window-diameter wide")

    k = params.weight_kernel()
    radius = params.window // 2
    gx, gy = spatial_gradient(prev)
    lam_min, txx, txy, tyy = _min_eigenvalue(gx, gy, k)
    solvable = (lam_min >= params.eig_threshold) & (lam_min > 0.0)
    det = np.where(solvable, txx * tyy - txy * txy, 1.0)

    if init is not None:
        u = init.u.copy()
        v = init.v.copy()
    else:
        u = np.zeros_like(prev)
        v = np.zeros_like(prev)
    oob_hit = np.zeros(prev.shape, dtype=bool)
    content_ok = np.ones(prev.shape, dtype=bool)

    # pixels drop out of the refinement once their update stalls below the
    # step tolerance; a converged window gains nothing from extra passes
    # and would only accumulate noise
    content_floor = params.min_content_ratio * lam_min
    active = solvable.copy()
    for _ in range(params.iterations):
        if not active.any():
            break
        warped, oob = kernels.warp_bilinear(nxt, u, v)
        oob_hit |= oob
        wgx, wgy = spatial_gradient(warped)
        lam_w, _, _, _ = _min_eigenvalue(wgx, wgy, k)
        content_ok &= ~active | (lam_w >= content_floor)
        dt = warped - prev
        bx = kernels.window_sum(gx * dt, k)
        by = kernels.window_sum(gy * dt, k)
        du = np.where(active, (txy * by - tyy * bx) / det, 0.0)
        dv = np.where(active, (txy * bx - txx * by) / det, 0.0)
        u += du
        v += dv
        active &= du * du + dv * dv >= params.step_tolerance**2

    warped, oob = kernels.warp_bilinear(nxt, u, v)
    oob_hit |= oob
    dt = warped - prev
    residual = kernels.window_sum(dt * dt, k) / np.maximum(txx + tyy, 1e-12)
    converged = residual <= params.max_residual

    valid = solvable & content_ok & converged & ~_box_dilate(oob_hit, radius)
    if init is not None:
        valid &= init.valid
    u[~valid] = 0.0
    v[~valid] = 0.0
    return FlowField(u=u, v=v, valid=valid)


def mean_object_speed(flow, mask):
    """Mean flow vector over the valid pixels of ``mask``.

    Returns the (u, v) tuple, or None when the mask holds no valid pixel
    (the caller decides how to treat a missing estimate). An entirely
    empty mask is a usage error.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != flow.shape:
        raise ValueError("mask shape must match the flow field")
    if not mask.any():
        raise ValueError("object mask is empty")
    sel = mask & flow.valid
    if not sel.any():
        return None
    return float(flow.u[sel].mean()), float(flow.v[sel].mean())


# -- flow file format -------------------------------------------------------


def save_flow(flow, path):
    """Write a flow field as CSV: a ``width,height`` line, then rows
    ``x,y,u,v,valid``."""
    h, w = flow.shape
    with open(path, "w", newline="") as fh:
        fh.write(f"{w},{h}\n")
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "u", "v", "valid"])
        for y in range(h):
            for x in range(w):
                writer.writerow(
                    [x, y, repr(float(flow.u[y, x])), repr(float(flow.v[y, x])),
                     int(flow.valid[y, x])]
                )


def load_flow(path):
    """Read a flow field written by :func:`save_flow`."""
    with open(path, "r", newline="") as fh:
        first = fh.readline().strip()
        try:
            w, h = (int(p) for p in first.split(","))
        except ValueError as exc:
            raise FileFormatError(f"{path}: bad dimensions line {first!r}") from exc
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x", "y", "u", "v", "valid"]:
            raise FileFormatError(f"{path}: unexpected column header {header!r}")
        flow = FlowField(
            u=np.zeros((h, w)), v=np.zeros((h, w)), valid=np.zeros((h, w), dtype=bool)
        )
        count = 0
        for row in reader:
            x, y = int(row[0]), int(row[1])
            flow.u[y, x] = float(row[2])
            flow.v[y, x] = float(row[3])
            flow.valid[y, x] = row[4] == "1"
            count += 1
        if count != w * h:
            raise FileFormatError(f"{path}: expected {w * h} rows, found {count}")
    return flow
