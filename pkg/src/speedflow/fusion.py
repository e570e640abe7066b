"""Parallel multi-scale flow: independent per-level estimates fused by
modeled confidence weights.

Every pyramid level is solved on its own (no cross-level data flow), its
vectors are rescaled into level-0 pixel units and upsampled to level-0
resolution, and the per-pixel fusion takes a weighted average where each
level's weight is a log-space Gaussian bump evaluated at that level's own
estimated speed: levels are trusted most near the speed they were
calibrated to resolve. Because levels never feed each other, they can be
computed concurrently and in any order with bit-identical output.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .errors import FileFormatError
from .lkflow import FlowField, LKParams, lk_flow, mean_object_speed
from .pyramid import build_pyramid


@dataclass(frozen=True)
class ConfidenceModel:
    """Log-space Gaussian confidence bumps, one per pyramid level.

    ``mu0``/``sigma0`` are the natural-log mean and spread of the level-0
    bump; level l's mean shifts by l*ln(scale) so consecutive peaks sit a
    factor ``scale`` apart in speed. The spread is shared by all levels.
    """

    mu0: float
    sigma0: float
    scale: float = 2.0
    levels: int = 3

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")
        if self.scale <= 1.0:
            raise ValueError("scale factor must exceed 1")
        if self.levels < 1:
            raise ValueError("at least one level is required")

    def level_mean(self, level):
        return self.mu0 + level * np.log(self.scale)

    def peak_speed(self, level):
        """Speed at which level ``level`` has confidence 1."""
        return float(np.exp(self.level_mean(level)))


def model_confidence(model, level, speed):
    """Modeled confidence of level ``level`` for a speed magnitude.

    exp(-((ln v - mu_l) / sigma0)^2), in (0, 1] with the peak at
    exp(mu_l). The speed must be positive; zero or invalid estimates get
    weight zero at the call site instead.
    """
    if not 0 <= level < model.levels:
        raise ValueError(f"level {level} outside 0..{model.levels - 1}")
    if np.any(np.asarray(speed) <= 0):
        raise ValueError("speed must be positive")
    z = (np.log(speed) - model.level_mean(level)) / model.sigma0
    return np.exp(-(z * z))


def _weights(model, level, speeds, usable):
    z = np.where(usable, speeds, 1.0)
    z = (np.log(z) - model.level_mean(level)) / model.sigma0
    return np.where(usable, np.exp(-(z * z)), 0.0)


@dataclass(frozen=True)
class ParallelParams:
    model: ConfidenceModel
    lk: LKParams = field(default_factory=LKParams)
    weight_floor: float = 1e-6

    def __post_init__(self):
        if self.weight_floor < 0:
            raise ValueError("weight floor must be non-negative")


@dataclass
class LevelEstimate:
    """One level's contribution, expressed on the level-0 grid."""

    level: int
    flow: FlowField
    weight: np.ndarray
    seconds: float


def _estimate_level(pyr_prev, pyr_nxt, level, scale, lk, out_shape):
    t0 = time.perf_counter()
    flow = lk_flow(pyr_prev[level], pyr_nxt[level], lk)
    factor = scale**level
    if level == 0:
        up = flow
    else:
        oh, ow = out_shape
        s = 1.0 / factor
        m = flow.valid.astype(np.float64)
        mu = kernels.resample_bilinear(np.ascontiguousarray(flow.u * m), oh, ow, s, s)
        mv = kernels.resample_bilinear(np.ascontiguousarray(flow.v * m), oh, ow, s, s)
        mm = kernels.resample_bilinear(np.ascontiguousarray(m), oh, ow, s, s)
        valid = mm >= 0.5
        denom = np.where(valid, mm, 1.0)
        up = FlowField(
            u=np.where(valid, mu / denom * factor, 0.0),
            v=np.where(valid, mv / denom * factor, 0.0),
            valid=valid,
        )
    return up, time.perf_counter() - t0


def parallel_flow_levels(prev, nxt, params, jobs=1):
    """Fused flow plus the per-level estimates and weight maps.

    ``jobs`` bounds the worker threads running pyramid levels
    concurrently; the merge always happens in level order, so the result
    is identical for any job count.
    """
    prev = np.asarray(prev, dtype=np.float64)
    nxt = np.asarray(nxt, dtype=np.float64)
    model = params.model
    num_levels = model.levels
    pp = build_pyramid(prev, num_levels, model.scale, min_dim=params.lk.window)
    pn = build_pyramid(nxt, num_levels, model.scale, min_dim=params.lk.window)
    out_shape = prev.shape

    def run(level):
        return _estimate_level(pp, pn, level, model.scale, params.lk, out_shape)

    if jobs > 1 and num_levels > 1:
        with ThreadPoolExecutor(max_workers=min(jobs, num_levels)) as pool:
            raw = list(pool.map(run, range(num_levels)))
    else:
        raw = [run(l) for l in range(num_levels)]

    t0 = time.perf_counter()
    estimates = []
    sum_w = np.zeros(out_shape)
    sum_u = np.zeros(out_shape)
    sum_v = np.zeros(out_shape)
    for level, (flow, seconds) in enumerate(raw):
        usable = flow.valid & (flow.speed() > 0.0)
        w = _weights(model, level, flow.speed(), usable)
        estimates.append(LevelEstimate(level=level, flow=flow, weight=w, seconds=seconds))
        sum_w += w
        sum_u += w * flow.u
        sum_v += w * flow.v
    valid = sum_w >= max(params.weight_floor, np.finfo(np.float64).tiny)
    denom = np.where(valid, sum_w, 1.0)
    fused = FlowField(
        u=np.where(valid, sum_u / denom, 0.0),
        v=np.where(valid, sum_v / denom, 0.0),
        valid=valid,
    )
    merge_seconds = time.perf_counter() - t0
    return fused, estimates, merge_seconds


def parallel_flow(prev, nxt, params, jobs=1):
    """Confidence-fused multi-scale flow at level-0 resolution."""
    fused, _, _ = parallel_flow_levels(prev, nxt, params, jobs=jobs)
    return fused


def parallel_object_speed(seq, mask, params, jobs=1):
    """Mean fused velocity over ``mask`` for the first two frames."""
    seq = np.asarray(seq)
    if seq.shape[0] < 2:
        raise ValueError("need at least two frames")
    flow = parallel_flow(seq[0], seq[1], params, jobs=jobs)
    return mean_object_speed(flow, mask)


# -- model file format -------------------------------------------------------


def save_model(model, path):
    """Write the model as ``key=value`` lines (mu0, sigma0, c, L)."""
    with open(path, "w") as fh:
        fh.write(f"mu0={model.mu0!r}\n")
        fh.write(f"sigma0={model.sigma0!r}\n")
        fh.write(f"c={model.scale!r}\n")
        fh.write(f"L={model.levels}\n")


def _parse_model(text, source, levels):
    values = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FileFormatError(f"{source}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    try:
        model = ConfidenceModel(
            mu0=float(values["mu0"]),
            sigma0=float(values["sigma0"]),
            scale=float(values["c"]),
            levels=int(values["L"]),
        )
    except KeyError as exc:
        raise FileFormatError(f"{source}: missing model key {exc}") from exc
    except ValueError as exc:
        raise FileFormatError(f"{source}: {exc}") from exc
    if levels is not None and levels != model.levels:
        model = ConfidenceModel(
            mu0=model.mu0, sigma0=model.sigma0, scale=model.scale, levels=levels
        )
    return model


def load_model(path, levels=None):
    """Read a ``key=value`` model file; ``levels`` overrides the stored L."""
    with open(path) as fh:
        return _parse_model(fh.read(), str(path), levels)


def default_model(levels=None):
    """Model calibrated on the default stimulus, shipped with the package."""
    from importlib.resources import files

    text = files("speedflow.data").joinpath("default_model.txt").read_text()
    return _parse_model(text, "packaged default model", levels)
