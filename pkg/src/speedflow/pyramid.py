"""Gaussian multi-scale representation of a frame.

Each level is the previous one smoothed with a Gaussian kernel (std tied
to the scale factor by the anti-aliasing rule 0.5*sqrt(c^2-1), truncated
at two standard deviations, mirrored borders) and resampled bilinearly by
the factor c. Level sizes follow floor division, so level l of an N-pixel
axis has floor(N / c**l) pixels; with c=2 sizes halve exactly on even
inputs.
"""

from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import PyramidError


@dataclass(frozen=True)
class Pyramid:
    levels: tuple
    scale: float

    @property
    def num_levels(self):
        return len(self.levels)

    def __getitem__(self, level):
        return self.levels[level]


def smoothing_kernel(scale):
    """1-D Gaussian kernel used before subsampling by ``scale``."""
    std = 0.5 * np.sqrt(scale * scale - 1.0)
    radius = max(1, int(np.ceil(2.0 * std)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * std * std))
    return k / k.sum()


def level_shapes(shape, num_levels, scale):
    """Per-level (height, width) sizes under repeated floor division."""
    shapes = [tuple(shape)]
    h, w = shape
    for _ in range(1, num_levels):
        h = int(np.floor(h / scale))
        w = int(np.floor(w / scale))
        shapes.append((h, w))
    return shapes


def build_pyramid(frame, num_levels, scale=2.0, min_dim=1):
    """Build a ``num_levels``-deep Gaussian pyramid of ``frame``.

    ``min_dim`` is the smallest admissible level side (callers pass the
    LK window diameter); a level below it raises PyramidError naming the
    offending level. Level 0 is the input array itself, unmodified.
    """
    if num_levels < 1:
        raise ValueError("pyramid needs at least one level")
    if scale <= 1.0:
        raise ValueError("scale factor must exceed 1")
    frame = np.ascontiguousarray(frame, dtype=np.float64)
    shapes = level_shapes(frame.shape, num_levels, scale)
    for l, (h, w) in enumerate(shapes):
        if min(h, w) < min_dim:
            raise PyramidError(
                f"pyramid level {l} would be {h}x{w}, below the minimum size {min_dim}"
            )
    k = smoothing_kernel(scale)
    levels = [frame]
    for l in range(1, num_levels):
        smoothed = kernels.smooth_reflect(levels[-1], k)
        h, w = shapes[l]
        levels.append(kernels.resample_bilinear(smoothed, h, w, scale, scale))
    return Pyramid(levels=tuple(levels), scale=float(scale))


def save_levels(pyr, directory):
    """Dump pyramid levels as ``level_%d.pgm`` files (debug aid)."""
    from .imgseq import save_pgm

    paths = []
    for l, level in enumerate(pyr.levels):
        p = f"{directory}/level_{l}.pgm"
        save_pgm(level, p)
        paths.append(p)
    return paths
