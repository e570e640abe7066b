"""Serial coarse-to-fine multi-scale flow (the classical baseline).

The flow is estimated at the coarsest pyramid level, then repeatedly
projected one level down (bilinear upsampling, vectors multiplied by the
scale factor) and corrected by a residual LK pass seeded with the
projection. Validity is the conjunction along the chain: a level-0 pixel
is valid only if every projection that fed it was valid.
"""

from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .lkflow import FlowField, LKParams, lk_flow, mean_object_speed
from .pyramid import build_pyramid


@dataclass(frozen=True)
class SerialParams:
    levels: int = 3
    scale: float = 2.0
    lk: LKParams = field(default_factory=LKParams)

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("at least one level is required")
        if self.scale <= 1.0:
            raise ValueError("scale factor must exceed 1")


_PROJECTION_BLUR = None


def _projection_kernel():
    global _PROJECTION_BLUR
    if _PROJECTION_BLUR is None:
        xs = np.arange(-3, 4, dtype=np.float64)
        k = np.exp(-(xs * xs) / (2.0 * 1.5**2))
        _PROJECTION_BLUR = k / k.sum()
    return _PROJECTION_BLUR


def project_flow(flow, out_shape, scale, smooth=True):
    """Project a coarse flow field to the next finer grid.

    Vectors are upsampled bilinearly and multiplied by ``scale``; invalid
    pixels are excluded from the interpolation (masked normalization) and
    a fine pixel stays valid only where the valid coverage is at least
    half. The projected field is then lightly smoothed (masked Gaussian,
    one fine-grid pixel): per-pixel noise in the coarse estimate would
    otherwise warp the finer level with a locally deforming field that
    the windowed refinement cannot undo.
    """
    oh, ow = out_shape
    s = 1.0 / scale
    m = flow.valid.astype(np.float64)
    mu = kernels.resample_bilinear(np.ascontiguousarray(flow.u * m), oh, ow, s, s)
    mv = kernels.resample_bilinear(np.ascontiguousarray(flow.v * m), oh, ow, s, s)
    mm = kernels.resample_bilinear(np.ascontiguousarray(m), oh, ow, s, s)
    if smooth:
        k = _projection_kernel()
        mu = kernels.smooth_reflect(np.ascontiguousarray(mu), k)
        mv = kernels.smooth_reflect(np.ascontiguousarray(mv), k)
        mm = kernels.smooth_reflect(np.ascontiguousarray(mm), k)
    valid = mm >= 0.5
    # values are extrapolated past the valid region (and the far field
    # takes the mean valid vector) so that windows near the validity
    # boundary warp against consistently aligned content; validity itself
    # still requires majority support
    if flow.valid.any():
        fu = float(flow.u[flow.valid].mean()) * scale
        fv = float(flow.v[flow.valid].mean()) * scale
    else:
        fu = fv = 0.0
    near = mm > 1e-3
    denom = np.where(near, mm, 1.0)
    u = np.where(near, mu / denom * scale, fu)
    v = np.where(near, mv / denom * scale, fv)
    return FlowField(u=u, v=v, valid=valid)


def serial_flow(prev, nxt, params=SerialParams(), timings=None):
    """Coarse-to-fine flow from ``prev`` to ``nxt`` at level-0 resolution.

    When ``timings`` is a list, (level, seconds) wall-time entries for the
    per-level LK solves are appended to it.
    """
    import time

    pp = build_pyramid(prev, params.levels, params.scale, min_dim=params.lk.window)
    pn = build_pyramid(nxt, params.levels, params.scale, min_dim=params.lk.window)

    flow = None
    for l in range(params.levels - 1, -1, -1):
        init = None
        if flow is not None:
            init = project_flow(flow, pp[l].shape, params.scale)
        t0 = time.perf_counter()
        flow = lk_flow(pp[l], pn[l], params.lk, init=init)
        if timings is not None:
            timings.append((l, time.perf_counter() - t0))
    return flow


def serial_object_speed(seq, mask, params=SerialParams()):
    """Mean object velocity from the first two frames of ``seq``.

    Returns (u, v) or None when no valid estimate covers the mask.
    """
    seq = np.asarray(seq)
    if seq.shape[0] < 2:
        raise ValueError("need at least two frames")
    flow = serial_flow(seq[0], seq[1], params)
    return mean_object_speed(flow, mask)
