"""Speed-discrimination benchmark.

A change from a reference speed counts as detected when the estimator's
outputs for the increased AND the decreased speed both differ from the
reference output by more than a fraction alpha of the reference. The
minimal detectable relative change is the smallest candidate fraction
achieving that in at least a quota (default 90%) of noise realizations;
the three sequences of a realization share one noise seed so the
comparison is paired. Curves over a range of reference speeds summarize
an estimator; comparing estimators reduces curves to mean/variance over a
speed band.
"""

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .calibration import DIAGONAL, derive_seed
from .coarse_to_fine import SerialParams, serial_flow
from .fusion import ParallelParams, parallel_flow_levels
from .imgseq import SynthSpec, generate_sequence, object_mask
from .lkflow import LKParams, lk_flow, mean_object_speed


# -- estimators --------------------------------------------------------------
#
# An estimator maps a stimulus spec to the estimated speed magnitude of
# the object (or None when it produces no usable estimate). Each call
# renders its own sequence from spec.seed, which keeps noise schedules
# paired across the speeds of one realization.



def _masked_speed(flow, mask):
    est = mean_object_speed(flow, mask)
    return None if est is None else float(np.hypot(*est))


class OracleEstimator:
    """Returns the true speed; used to validate the benchmark itself."""

    name = "oracle"
    levels = 1

    def __call__(self, spec):
        return float(np.hypot(*spec.velocity))


@dataclass
class SingleLevelEstimator:
    level: int = 0
    scale: float = 2.0
    lk: LKParams = field(default_factory=LKParams)

    @property
    def name(self):
        return f"level{self.level}"

    @property
    def levels(self):
        return 1

    def __call__(self, spec):
        from .pyramid import build_pyramid, level_shapes

        seq = generate_sequence(spec)
        shape = level_shapes(seq[0].shape, self.level + 1, self.scale)[self.level]
        mask = object_mask(spec, t=0, level=self.level, scale=self.scale, shape=shape)
        pp = build_pyramid(seq[0], self.level + 1, self.scale, min_dim=self.lk.window)
        pn = build_pyramid(seq[1], self.level + 1, self.scale, min_dim=self.lk.window)
        flow = lk_flow(pp[self.level], pn[self.level], self.lk)
        est = _masked_speed(flow, mask)
        return None if est is None else est * self.scale**self.level


@dataclass
class SerialEstimator:
    params: SerialParams = field(default_factory=SerialParams)

    @property
    def name(self):
        return "serial"

    @property
    def levels(self):
        return self.params.levels

    def __call__(self, spec):
        seq = generate_sequence(spec)
        mask = object_mask(spec, t=0)
        flow = serial_flow(seq[0], seq[1], self.params)
        return _masked_speed(flow, mask)


@dataclass
class ParallelEstimator:
    params: ParallelParams
    jobs: int = 1

    @property
    def name(self):
        return "parallel"

    @property
    def levels(self):
        return self.params.model.levels

    def __call__(self, spec):
        seq = generate_sequence(spec)
        mask = object_mask(spec, t=0)
        fused, _, _ = parallel_flow_levels(seq[0], seq[1], self.params, jobs=self.jobs)
        return _masked_speed(fused, mask)


# -- detection protocol ------------------------------------------------------


@dataclass(frozen=True)
class DiscriminationParams:
    """Protocol parameters for one benchmark run.

    ``delta_fractions`` are the candidate relative changes, increasing.
    ``stimulus.seed`` is the master seed of the whole benchmark.
    """

    alpha: float = 0.05
    speeds: tuple = tuple(np.geomspace(1.0, 15.0, 12))
    delta_fractions: tuple = tuple(np.arange(0.02, 0.601, 0.01))
    realizations: int = 19
    quota: float = 0.90
    direction: tuple[float, float] = DIAGONAL
    stimulus: SynthSpec = field(default_factory=SynthSpec)
    signed: bool = True
    paired: bool = False

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if not 0.5 < self.quota <= 1.0:
            raise ValueError("quota must lie in (0.5, 1]")
        deltas = tuple(float(d) for d in self.delta_fractions)
        object.__setattr__(self, "delta_fractions", deltas)
        if any(b <= a for a, b in zip(deltas, deltas[1:])) or not deltas:
            raise ValueError("delta candidates must be increasing")
        if any(d <= 0 for d in deltas):
            raise ValueError("delta candidates must be positive")
        speeds = tuple(float(v) for v in self.speeds)
        object.__setattr__(self, "speeds", speeds)
        if any(v <= 0 for v in speeds):
            raise ValueError("reference speeds must be positive")
        norm = float(np.hypot(*self.direction))
        object.__setattr__(
            self, "direction", (self.direction[0] / norm, self.direction[1] / norm)
        )

    def spec_for(self, speed, seed):
        return replace(
            self.stimulus,
            velocity=(speed * self.direction[0], speed * self.direction[1]),
            frames=2,
            seed=seed,
        )


def _change_detected(ref, faster, slower, v_obj, params):
    if ref is None or faster is None or slower is None:
        return False
    if params.signed:
        # the faster stimulus must read faster and the slower one slower,
        # mirroring the two-alternative judgement the benchmark models;
        # an erratic estimator cannot satisfy both orderings consistently
        return (faster - ref) / v_obj > params.alpha and (
            ref - slower
        ) / v_obj > params.alpha
    return (
        abs(ref - faster) / v_obj > params.alpha
        and abs(ref - slower) / v_obj > params.alpha
    )


def _trial_seeds(params, realization):
    """Generator seeds for the (reference, faster, slower) presentations.

    Unpaired trials draw fresh noise for each presentation, as a
    psychophysical observer would see; the paired variant reuses one
    noise schedule across the three speeds of a realization.
    """
    master = params.stimulus.seed
    if params.paired:
        seed = derive_seed(master, realization)
        return seed, seed, seed
    return (
        derive_seed(master, realization, 0),
        derive_seed(master, realization, 1),
        derive_seed(master, realization, 2),
    )


def is_detectable(v_obj, dv, estimator, realization, params):
    """Whether a +-dv change from v_obj is noticeable in one realization.

    Runs the estimator on the reference, increased and decreased speeds;
    both responses must differ from the reference by more than
    alpha * v_obj (and in the matching direction unless ``params.signed``
    is off). A missing estimate counts as not detectable.
    """
    if v_obj <= 0 or dv <= 0:
        raise ValueError("v_obj and dv must be positive")
    s_ref, s_fast, s_slow = _trial_seeds(params, realization)
    ref = estimator(params.spec_for(v_obj, s_ref))
    faster = estimator(params.spec_for(v_obj + dv, s_fast))
    slower = estimator(params.spec_for(v_obj - dv, s_slow))
    return _change_detected(ref, faster, slower, v_obj, params)


def _detectable_quota(v_obj, dv, estimator, params, ref_cache):
    """True when the change is detected in at least quota of realizations.

    Reference estimates are cached per realization; the scan aborts as
    soon as the quota can no longer be met.
    """
    needed = int(np.ceil(params.quota * params.realizations))
    allowed_failures = params.realizations - needed
    failures = 0
    for r in range(params.realizations):
        s_ref, s_fast, s_slow = _trial_seeds(params, r)
        if r not in ref_cache:
            ref_cache[r] = estimator(params.spec_for(v_obj, s_ref))
        ref = ref_cache[r]
        if ref is not None:
            faster = estimator(params.spec_for(v_obj + dv, s_fast))
            slower = estimator(params.spec_for(v_obj - dv, s_slow))
            ok = _change_detected(ref, faster, slower, v_obj, params)
        else:
            ok = False
        if not ok:
            failures += 1
            if failures > allowed_failures:
                return False
    return True


def min_detectable(v_obj, estimator, params):
    """Smallest candidate relative change detected at quota, in percent.

    Returns None when no candidate qualifies (plotted as a gap). The
    largest candidate also caps the stimulus bounds check, so sequences
    are validated before any estimation runs.
    """
    top = v_obj * (1.0 + params.delta_fractions[-1])
    params.spec_for(top, 0).check_bounds()
    ref_cache = {}
    for frac in params.delta_fractions:
        if _detectable_quota(v_obj, v_obj * frac, estimator, params, ref_cache):
            return 100.0 * frac
    return None


def discrimination_curve(estimator, params):
    """min_detectable over all reference speeds: list of (v, pct or None)."""
    return [(v, min_detectable(v, estimator, params)) for v in params.speeds]


def curve_summary(curve, lo=1.0, hi=15.0):
    """Mean and population variance of the curve inside [lo, hi].

    Speeds without a detectable change are excluded; the count of such
    gaps is returned alongside.
    """
    values = [pct for v, pct in curve if lo <= v <= hi and pct is not None]
    gaps = sum(1 for v, pct in curve if lo <= v <= hi and pct is None)
    if not values:
        return None, None, gaps
    arr = np.asarray(values)
    return float(arr.mean()), float(arr.var()), gaps


def compare(estimators, params, range_lo=1.0, range_hi=15.0):
    """Curves and summary statistics for several estimators.

    Returns (curve_rows, summaries): long-format rows
    {method, L, v_obj, min_delta_pct} for plotting plus one summary row
    per estimator with mean and variance over [range_lo, range_hi].
    """
    curve_rows = []
    summaries = []
    for est in estimators:
        curve = discrimination_curve(est, params)
        for v, pct in curve:
            curve_rows.append(
                {"method": est.name, "L": est.levels, "v_obj": v, "min_delta_pct": pct}
            )
        mean, var, gaps = curve_summary(curve, range_lo, range_hi)
        summaries.append(
            {
                "method": est.name,
                "L": est.levels,
                "mean": mean,
                "variance": var,
                "range_lo": range_lo,
                "range_hi": range_hi,
                "gaps": gaps,
            }
        )
    return curve_rows, summaries


def detectable_range_max(curve, threshold_pct=30.0):
    """Largest reference speed whose minimal detectable change is below
    ``threshold_pct``; None when no speed qualifies."""
    qualifying = [v for v, pct in curve if pct is not None and pct < threshold_pct]
    return max(qualifying) if qualifying else None


# -- runtime reporting -------------------------------------------------------


@dataclass
class RuntimeReport:
    pixels: int
    levels: int
    per_level_seconds: list
    merge_seconds: float
    total_seconds: float
    concurrent_total_seconds: float | None = None

    def rows(self):
        out = [("pixels", self.pixels), ("levels", self.levels)]
        out += [(f"level{l}_seconds", s) for l, s in self.per_level_seconds]
        out += [
            ("merge_seconds", self.merge_seconds),
            ("total_seconds", self.total_seconds),
        ]
        if self.concurrent_total_seconds is not None:
            out.append(("concurrent_total_seconds", self.concurrent_total_seconds))
        return out


def runtime_report(estimator, prev, nxt):
    """Wall-clock breakdown of one flow computation.

    For the parallel estimator the per-level times come from a sequential
    run and the concurrent total from a one-thread-per-level run (the two
    runs produce identical fields by construction).
    """
    pixels = int(prev.size)
    if isinstance(estimator, ParallelEstimator):
        t0 = time.perf_counter()
        _, estimates, merge_s = parallel_flow_levels(prev, nxt, estimator.params, jobs=1)
        total = time.perf_counter() - t0
        levels = estimator.params.model.levels
        t1 = time.perf_counter()
        parallel_flow_levels(prev, nxt, estimator.params, jobs=levels)
        concurrent = time.perf_counter() - t1
        return RuntimeReport(
            pixels=pixels,
            levels=levels,
            per_level_seconds=[(e.level, e.seconds) for e in estimates],
            merge_seconds=merge_s,
            total_seconds=total,
            concurrent_total_seconds=concurrent,
        )
    if isinstance(estimator, SerialEstimator):
        timings = []
        t0 = time.perf_counter()
        serial_flow(prev, nxt, estimator.params, timings=timings)
        total = time.perf_counter() - t0
        return RuntimeReport(
            pixels=pixels,
            levels=estimator.params.levels,
            per_level_seconds=timings,
            merge_seconds=0.0,
            total_seconds=total,
        )
    t0 = time.perf_counter()
    lk = getattr(estimator, "lk", LKParams())
    lk_flow(prev, nxt, lk)
    total = time.perf_counter() - t0
    return RuntimeReport(
        pixels=pixels,
        levels=1,
        per_level_seconds=[(0, total)],
        merge_seconds=0.0,
        total_seconds=total,
    )


# -- CSV output --------------------------------------------------------------


def save_curves(curve_rows, path):
    """Write curves as ``method,L,v_obj,min_delta_pct`` (gaps left empty)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "L", "v_obj", "min_delta_pct"])
        for row in curve_rows:
            pct = row["min_delta_pct"]
            writer.writerow(
                [row["method"], row["L"], f"{row['v_obj']:.6g}",
                 "" if pct is None else f"{pct:.6g}"]
            )


def save_summary(summaries, path):
    """Write summaries as ``method,L,mean,variance,range_lo,range_hi``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "L", "mean", "variance", "range_lo", "range_hi"])
        for row in summaries:
            writer.writerow(
                [
                    row["method"],
                    row["L"],
                    "" if row["mean"] is None else f"{row['mean']:.6g}",
                    "" if row["variance"] is None else f"{row['variance']:.6g}",
                    f"{row['range_lo']:.6g}",
                    f"{row['range_hi']:.6g}",
                ]
            )
