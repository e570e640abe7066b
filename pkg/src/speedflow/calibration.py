"""Empirical per-level confidence measurement and model fitting.

A level's confidence at a reference speed is one minus the relative
magnitude error of its estimate, clamped into [0, 1] and averaged over
noise realizations. Sweeping reference speeds produces the per-level
confidence curves; a single (mu0, sigma0) pair is then fit jointly across
levels, with the level means tied a factor ``scale`` apart, by a coarse
grid search refined with a deterministic pattern search.
"""

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import FitError
from .fusion import ConfidenceModel
from .imgseq import SynthSpec, generate_sequence, object_mask
from .lkflow import LKParams, lk_flow, mean_object_speed
from .pyramid import build_pyramid

DIAGONAL = (1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0))


@dataclass(frozen=True)
class ConfidenceSample:
    """Mean (and spread) of the clamped confidence at one (level, speed)."""

    level: int
    v_r: float
    realizations: int
    k_mean: float
    k_std: float


@dataclass(frozen=True)
class SpeedSweep:
    """Reference speeds, realization count and the stimulus they act on.

    ``stimulus.seed`` is the master seed; every (speed, realization) cell
    derives its own generator seed from it, so sweeps are reproducible
    and cells are independent.
    """

    speeds: tuple
    realizations: int = 30
    noise_sigma: float = 0.035
    direction: tuple[float, float] = DIAGONAL
    stimulus: SynthSpec = field(default_factory=SynthSpec)

    def __post_init__(self):
        speeds = tuple(float(s) for s in self.speeds)
        object.__setattr__(self, "speeds", speeds)
        if len(speeds) == 0:
            raise ValueError("sweep needs at least one speed")
        if any(s <= 0 for s in speeds):
            raise ValueError("sweep speeds must be positive")
        if any(b <= a for a, b in zip(speeds, speeds[1:])):
            raise ValueError("sweep speeds must be strictly increasing")
        if self.realizations < 1:
            raise ValueError("at least one realization per speed")
        norm = float(np.hypot(*self.direction))
        if not np.isfinite(norm) or norm == 0:
            raise ValueError("direction must be a nonzero vector")
        object.__setattr__(
            self, "direction", (self.direction[0] / norm, self.direction[1] / norm)
        )

    def spec_for(self, speed, seed):
        return replace(
            self.stimulus,
            velocity=(speed * self.direction[0], speed * self.direction[1]),
            noise_sigma=self.noise_sigma,
            frames=2,
            seed=seed,
        )


def default_sweep(**overrides):
    """40 log-spaced speeds in [0.5, 20] px/frame, 30 realizations each."""
    speeds = tuple(np.geomspace(0.5, 20.0, 40))
    return SpeedSweep(speeds=speeds, **overrides)


def derive_seed(master, *indices):
    """Stable per-cell seed from a master seed and integer indices."""
    return int(np.random.SeedSequence((int(master),) + tuple(int(i) for i in indices))
               .generate_state(1)[0])


def level_speed(prev, nxt, level, scale, lk, mask):
    """Speed magnitude estimated by LK at one pyramid level only.

    The mean flow over ``mask`` (given at level resolution) is rescaled
    by scale**level into level-0 pixel units. None when nothing valid.
    """
    pp = build_pyramid(prev, level + 1, scale, min_dim=lk.window)
    pn = build_pyramid(nxt, level + 1, scale, min_dim=lk.window)
    flow = lk_flow(pp[level], pn[level], lk)
    est = mean_object_speed(flow, mask)
    if est is None:
        return None
    return float(np.hypot(*est) * scale**level)


def relative_confidence(v_r, v_e):
    """1 - |v_r - v_e| / v_r, clamped into [0, 1]; a missing estimate is 0."""
    if v_e is None:
        return 0.0
    return float(np.clip(1.0 - abs(v_r - v_e) / v_r, 0.0, 1.0))


def _measure(sweep, levels, lk, scale, jobs=1):
    """Confidence samples for every requested level in one pass.

    Each (speed, realization) cell renders one two-frame sequence, builds
    the pyramid once and estimates every level from it; cells are
    independent and may run on worker threads.
    """
    max_level = max(levels)
    for s in sweep.speeds:
        sweep.spec_for(s, 0).check_bounds()

    def run_cell(args):
        si, ri = args
        spec = sweep.spec_for(
            sweep.speeds[si], derive_seed(sweep.stimulus.seed, si, ri)
        )
        seq = generate_sequence(spec)
        pp = build_pyramid(seq[0], max_level + 1, scale, min_dim=lk.window)
        pn = build_pyramid(seq[1], max_level + 1, scale, min_dim=lk.window)
        out = {}
        for l in levels:
            mask = object_mask(spec, t=0, level=l, scale=scale, shape=pp[l].shape)
            est = mean_object_speed(lk_flow(pp[l], pn[l], lk), mask)
            v_e = None if est is None else float(np.hypot(*est) * scale**l)
            out[l] = relative_confidence(sweep.speeds[si], v_e)
        return out

    cells = [(si, ri) for si in range(len(sweep.speeds)) for ri in range(sweep.realizations)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(c) for c in cells]

    samples = {l: [] for l in levels}
    for si, v_r in enumerate(sweep.speeds):
        base = si * sweep.realizations
        for l in levels:
            ks = np.array([results[base + ri][l] for ri in range(sweep.realizations)])
            samples[l].append(
                ConfidenceSample(
                    level=l,
                    v_r=v_r,
                    realizations=sweep.realizations,
                    k_mean=float(ks.mean()),
                    k_std=float(ks.std()),
                )
            )
    return samples


def measure_confidence(sweep, level, lk=LKParams(), scale=2.0, jobs=1):
    """Empirical confidence curve of one pyramid level over the sweep."""
    return _measure(sweep, [level], lk, scale, jobs=jobs)[level]


def measure_confidence_levels(sweep, levels, lk=LKParams(), scale=2.0, jobs=1):
    """Curves for several levels, sharing sequences across levels."""
    return _measure(sweep, list(levels), lk, scale, jobs=jobs)


# -- model fitting -----------------------------------------------------------


def _sse(mu0, sigma0, scale, flat):
    log_v, level, k = flat
    z = (log_v - (mu0 + level * np.log(scale))) / sigma0
    return float(np.sum((np.exp(-(z * z)) - k) ** 2))


def fit_model(samples, scale=2.0, levels=None):
    """Fit (mu0, sigma0) to per-level confidence samples.

    ``samples`` maps level -> list of ConfidenceSample. The level means
    are tied (mu_l = mu0 + l*ln scale) and a single sigma0 is shared. The
    optimizer is a coarse grid over mu0 in [ln 0.1, ln 10] and sigma0 in
    [0.05, 3], refined by a shrinking compass search; both stages are
    deterministic. Raises FitError on degenerate data (fewer than four
    distinct level-0 speeds with confidence above 0.05).
    """
    if levels is None:
        levels = max(samples.keys()) + 1
    level0 = samples.get(0, [])
    alive = {s.v_r for s in level0 if s.k_mean > 0.05}
    if len(alive) < 4:
        raise FitError(
            "need at least 4 level-0 speeds with confidence above 0.05 to fit"
        )

    flat = (
        np.array([np.log(s.v_r) for l in samples for s in samples[l]]),
        np.array([float(l) for l in samples for _ in samples[l]]),
        np.array([s.k_mean for l in samples for s in samples[l]]),
    )

    mu_grid = np.linspace(np.log(0.1), np.log(10.0), 64)
    sig_grid = np.linspace(0.05, 3.0, 60)
    best = (np.inf, mu_grid[0], sig_grid[0])
    for mu in mu_grid:
        for sig in sig_grid:
            err = _sse(mu, sig, scale, flat)
            if err < best[0]:
                best = (err, mu, sig)

    err, mu, sig = best
    step_mu = float(mu_grid[1] - mu_grid[0])
    step_sig = float(sig_grid[1] - sig_grid[0])
    while max(step_mu, step_sig) > 1e-7:
        moved = False
        for cand_mu, cand_sig in (
            (mu + step_mu, sig),
            (mu - step_mu, sig),
            (mu, min(max(sig + step_sig, 1e-6), 10.0)),
            (mu, max(sig - step_sig, 1e-6)),
        ):
            cand_err = _sse(cand_mu, cand_sig, scale, flat)
            if cand_err < err:
                err, mu, sig = cand_err, cand_mu, cand_sig
                moved = True
                break
        if not moved:
            step_mu /= 2.0
            step_sig /= 2.0
    return ConfidenceModel(mu0=float(mu), sigma0=float(sig), scale=scale, levels=levels)


def empirical_peak_speed(samples_for_level):
    """Sweep speed with the highest measured confidence at one level."""
    best = max(samples_for_level, key=lambda s: s.k_mean)
    return best.v_r


def fit_level_peak(samples_for_level):
    """Peak speed of one level from an untied log-Gaussian fit.

    Unlike the raw argmax, which dithers across a plateau of near-equal
    confidences, the fitted center uses the whole curve shape, so peaks
    of consecutive levels can be compared robustly.
    """
    log_v = np.array([np.log(s.v_r) for s in samples_for_level])
    level = np.zeros(len(log_v))
    k = np.array([s.k_mean for s in samples_for_level])
    flat = (log_v, level, k)

    mu_grid = np.linspace(log_v.min(), log_v.max(), 80)
    sig_grid = np.linspace(0.05, 3.0, 60)
    best = (np.inf, mu_grid[0], sig_grid[0])
    for mu in mu_grid:
        for sig in sig_grid:
            err = _sse(mu, sig, 2.0, flat)
            if err < best[0]:
                best = (err, mu, sig)
    err, mu, sig = best
    step_mu = float(mu_grid[1] - mu_grid[0])
    step_sig = float(sig_grid[1] - sig_grid[0])
    while max(step_mu, step_sig) > 1e-7:
        moved = False
        for cand_mu, cand_sig in (
            (mu + step_mu, sig),
            (mu - step_mu, sig),
            (mu, min(max(sig + step_sig, 1e-6), 10.0)),
            (mu, max(sig - step_sig, 1e-6)),
        ):
            cand_err = _sse(cand_mu, cand_sig, 2.0, flat)
            if cand_err < err:
                err, mu, sig = cand_err, cand_mu, cand_sig
                moved = True
                break
        if not moved:
            step_mu /= 2.0
            step_sig /= 2.0
    return float(np.exp(mu))


# -- CSV output --------------------------------------------------------------


def save_samples(samples, path):
    """Write samples as ``level,v_r,k_mean,k_std,n`` CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "v_r", "k_mean", "k_std", "n"])
        for level in sorted(samples):
            for s in samples[level]:
                writer.writerow(
                    [s.level, f"{s.v_r:.6g}", f"{s.k_mean:.6g}", f"{s.k_std:.6g}",
                     s.realizations]
                )


def load_samples(path):
    """Read a CSV written by :func:`save_samples`."""
    samples = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            s = ConfidenceSample(
                level=int(row["level"]),
                v_r=float(row["v_r"]),
                realizations=int(row["n"]),
                k_mean=float(row["k_mean"]),
                k_std=float(row["k_std"]),
            )
            samples.setdefault(s.level, []).append(s)
    return samples
