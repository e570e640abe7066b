"""Grayscale frames, binary PGM I/O and synthetic moving-object sequences.

Frames are 2-D float64 arrays with intensities in [0, 1]; quantization to
bytes happens only when writing PGM files. The generator renders a single
object (square, disk or gaussian blob) translating at a constant, possibly
sub-pixel, velocity, with optional additive Gaussian noise re-drawn per
frame from an explicit seed.
"""

import re
from dataclasses import dataclass, replace

import numpy as np

from .errors import FileFormatError, StimulusError

OBJECT_KINDS = ("square", "disk", "blob")


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic moving-object sequence.

    ``contrast`` is added on top of ``background`` inside the object, so
    background + contrast must stay within [0, 1]. ``velocity`` is the
    per-frame displacement (u, v) in pixels and may be fractional; the
    object is antialiased by analytic pixel coverage so sub-pixel motion
    is faithful. ``start`` is the object center in frame 0; when None the
    whole trajectory is centered in the frame.
    """

    size: int = 128
    kind: str = "blob"
    diameter: float = 16.0
    contrast: float = 0.88
    background: float = 0.06
    velocity: tuple[float, float] = (0.0, 0.0)
    frames: int = 2
    noise_sigma: float = 0.035
    seed: int = 0
    start: tuple[float, float] | None = None
    blur_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in OBJECT_KINDS:
            raise ValueError(f"object kind must be one of {OBJECT_KINDS}, got {self.kind!r}")
        if self.size < 4:
            raise ValueError("frame size must be at least 4 pixels")
        if self.diameter <= 0:
            raise ValueError("object diameter must be positive")
        if not (0.0 <= self.background <= 1.0 and 0.0 <= self.contrast <= 1.0):
            raise ValueError("background and contrast must lie in [0, 1]")
        if self.background + self.contrast > 1.0:
            raise ValueError("background + contrast must not exceed 1")
        if self.frames < 1:
            raise ValueError("frame count must be at least 1")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")
        if self.blur_sigma < 0:
            raise ValueError("blur sigma must be non-negative")

    def center(self, t):
        """Object center (cx, cy) at frame ``t``."""
        if self.start is None:
            mid = (self.size - 1) / 2.0
            span = self.frames - 1
            sx = mid - span * self.velocity[0] / 2.0
            sy = mid - span * self.velocity[1] / 2.0
        else:
            sx, sy = self.start
        return sx + t * self.velocity[0], sy + t * self.velocity[1]

    def check_bounds(self):
        """Raise StimulusError unless the object stays inside every frame."""
        half = self.diameter / 2.0 + 0.5 + 2.0 * self.blur_sigma
        for t in (0, self.frames - 1):
            cx, cy = self.center(t)
            if not (half <= cx <= self.size - 1 - half and half <= cy <= self.size - 1 - half):
                raise StimulusError(
                    f"object (diameter {self.diameter}) leaves the {self.size}px frame "
                    f"at t={t}: center=({cx:.2f}, {cy:.2f})"
                )


# -- object rendering ------------------------------------------------------
#
# Coverage is computed from the closed-form area of the object inside each
# pixel square, so the rendered total intensity is independent of the
# sub-pixel position of the object.


def _square_coverage(n, cx, cy, half):
    xs = np.arange(n, dtype=np.float64)
    covx = np.clip(np.minimum(xs + 0.5, cx + half) - np.maximum(xs - 0.5, cx - half), 0.0, 1.0)
    covy = np.clip(np.minimum(xs + 0.5, cy + half) - np.maximum(xs - 0.5, cy - half), 0.0, 1.0)
    return np.outer(covy, covx)


def _disk_quadrant_area(x, y, r):
    # area of {u <= x, v <= y} inside a radius-r disk at the origin
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    xc = np.clip(x, -r, r)
    yc = np.clip(y, -r, r)

    def below(t):
        # half-chord integral: area of {u <= 0, v <= t} inside the disk
        return 0.5 * (t * np.sqrt(np.maximum(r * r - t * t, 0.0)) + r * r * np.arcsin(t / r)) \
            + 0.25 * np.pi * r * r

    def quad_pos(xp, yq):
        # xp >= 0 branch; split at v* = sqrt(r^2 - xp^2)
        vs = np.sqrt(np.maximum(r * r - xp * xp, 0.0))
        low = 2.0 * below(yq)
        mid = below(-vs) + below(yq) + xp * (yq + vs)
        high = below(-vs) - below(vs) + 2.0 * xp * vs + 2.0 * below(yq)
        return np.where(yq <= -vs, low, np.where(yq <= vs, mid, high))

    pos = quad_pos(np.abs(xc), yc)
    return np.where(xc >= 0, pos, 2.0 * below(yc) - pos)


def _disk_coverage(n, cx, cy, radius):
    xs = np.arange(n, dtype=np.float64)
    x0 = (xs - 0.5 - cx)[None, :]
    x1 = (xs + 0.5 - cx)[None, :]
    y0 = (xs - 0.5 - cy)[:, None]
    y1 = (xs + 0.5 - cy)[:, None]
    a = _disk_quadrant_area
    return (
        a(x1, y1, radius) - a(x0, y1, radius) - a(x1, y0, radius) + a(x0, y0, radius)
    )


def _blob_profile(n, cx, cy, sigma):
    xs = np.arange(n, dtype=np.float64)
    gx = np.exp(-((xs - cx) ** 2) / (2.0 * sigma * sigma))
    gy = np.exp(-((xs - cy) ** 2) / (2.0 * sigma * sigma))
    return np.outer(gy, gx)


def _coverage(spec, cx, cy):
    if spec.kind == "square":
        return _square_coverage(spec.size, cx, cy, spec.diameter / 2.0)
    if spec.kind == "disk":
        return _disk_coverage(spec.size, cx, cy, spec.diameter / 2.0)
    return _blob_profile(spec.size, cx, cy, spec.diameter / 4.0)


def render_frame(spec, t):
    """Noise-free frame ``t`` of the sequence described by ``spec``.

    The analytic coverage render is optionally softened by a Gaussian
    optics blur (``blur_sigma``), which bandlimits the object's rim so
    finite-difference gradients stay faithful under sub-pixel motion.
    """
    cx, cy = spec.center(t)
    frame = spec.background + spec.contrast * _coverage(spec, cx, cy)
    if spec.blur_sigma > 0:
        from .backend import kernels

        radius = max(1, int(np.ceil(3.0 * spec.blur_sigma)))
        xs = np.arange(-radius, radius + 1, dtype=np.float64)
        k = np.exp(-(xs * xs) / (2.0 * spec.blur_sigma**2))
        frame = kernels.smooth_reflect(frame, k / k.sum())
    return frame


def generate_sequence(spec):
    """Render the full sequence as a (frames, size, size) float array.

    Deterministic for a given spec: the per-pixel Gaussian noise is drawn
    from ``spec.seed`` frame by frame and clipped into [0, 1] after
    addition. Raises StimulusError when the trajectory leaves the frame.
    """
    spec.check_bounds()
    rng = np.random.default_rng(spec.seed)
    out = np.empty((spec.frames, spec.size, spec.size), dtype=np.float64)
    for t in range(spec.frames):
        frame = render_frame(spec, t)
        if spec.noise_sigma > 0:
            frame = frame + rng.normal(0.0, spec.noise_sigma, frame.shape)
            np.clip(frame, 0.0, 1.0, out=frame)
        out[t] = frame
    return out


def object_mask(spec, t=0, level=0, scale=2.0, shape=None):
    """Boolean mask of the object's pixels at frame ``t``.

    ``level``/``scale`` map the geometry onto pyramid level coordinates
    (center at ((c+0.5)/scale**level - 0.5), diameter shrunk accordingly);
    ``shape`` overrides the mask resolution and must then match the
    pyramid level. Hard-edged objects own the pixels they at least half
    cover; the Gaussian blob, whose mass extends well past its half-peak
    radius, owns pixels down to a tenth of its peak.
    """
    factor = float(scale) ** level
    n = spec.size
    for _ in range(level):
        n = int(np.floor(n / scale))
    if shape is not None:
        n = shape[0]
    cx, cy = spec.center(t)
    scaled = replace(
        spec,
        size=n,
        diameter=spec.diameter / factor,
        start=((cx + 0.5) / factor - 0.5, (cy + 0.5) / factor - 0.5),
        velocity=(0.0, 0.0),
    )
    sx, sy = scaled.center(0)
    threshold = 0.1 if spec.kind == "blob" else 0.5
    return _coverage(scaled, sx, sy) >= threshold


# -- PGM files -------------------------------------------------------------

_PGM_HEADER = re.compile(rb"^P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def load_pgm(path):
    """Read a binary (P5) PGM file into a float frame scaled to [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    m = _PGM_HEADER.match(data)
    if not m:
        raise FileFormatError(f"{path}: not a binary PGM (P5) file")
    width, height, maxval = (int(g) for g in m.groups())
    if width < 1 or height < 1 or not (0 < maxval <= 65535):
        raise FileFormatError(f"{path}: invalid PGM dimensions or maxval")
    payload = data[m.end():]
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    if len(payload) < expected:
        raise FileFormatError(
            f"{path}: truncated payload ({len(payload)} bytes, expected {expected})"
        )
    raw = np.frombuffer(payload[:expected], dtype=dtype).reshape(height, width)
    return raw.astype(np.float64) / maxval


def save_pgm(frame, path):
    """Write a frame as binary PGM, quantized to 8 bits (round half up)."""
    frame = np.asarray(frame, dtype=np.float64)
    quantized = np.floor(np.clip(frame, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    header = f"P5 {frame.shape[1]} {frame.shape[0]} 255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quantized.tobytes())


def save_sequence(seq, directory):
    """Write frames as ``frame_%05d.pgm`` under ``directory``."""
    paths = []
    for t, frame in enumerate(seq):
        p = f"{directory}/frame_{t:05d}.pgm"
        save_pgm(frame, p)
        paths.append(p)
    return paths


def load_sequence(paths):
    """Load an ordered list of PGM paths into one (T, H, W) array."""
    frames = [load_pgm(p) for p in paths]
    if len(frames) == 0:
        raise FileFormatError("no frames to load")
    shape = frames[0].shape
    if any(f.shape != shape for f in frames):
        raise FileFormatError("sequence frames have differing dimensions")
    return np.stack(frames)
