"""Speed-discrimination benchmark machinery."""

import numpy as np
import pytest

from speedflow.discrimination import (
    DiscriminationParams,
    OracleEstimator,
    ParallelEstimator,
    SerialEstimator,
    SingleLevelEstimator,
    compare,
    curve_summary,
    detectable_range_max,
    discrimination_curve,
    is_detectable,
    min_detectable,
    runtime_report,
    save_curves,
    save_summary,
)
from speedflow.coarse_to_fine import SerialParams
from speedflow.fusion import ConfidenceModel, ParallelParams
from speedflow.imgseq import SynthSpec, generate_sequence


def quick_params(**overrides):
    defaults = dict(
        speeds=(2.0, 4.0),
        delta_fractions=tuple(np.arange(0.02, 0.31, 0.02)),
        realizations=6,
        stimulus=SynthSpec(seed=0),
    )
    defaults.update(overrides)
    return DiscriminationParams(**defaults)


class TestOracle:
    def test_min_detectable_is_first_candidate_past_alpha(self):
        params = quick_params(
            speeds=tuple(float(v) for v in range(1, 8)),
            delta_fractions=tuple(np.arange(0.01, 0.21, 0.01)),
            alpha=0.05,
        )
        oracle = OracleEstimator()
        for v in params.speeds:
            # |v - v(1 +- d)| / v = d exactly, so the smallest candidate
            # strictly above alpha wins at every reference speed
            assert min_detectable(v, oracle, params) == pytest.approx(6.0)

    def test_alpha_monotonicity(self):
        oracle = OracleEstimator()
        previous = 0.0
        for alpha in (0.03, 0.07, 0.11, 0.19):
            params = quick_params(
                delta_fractions=tuple(np.arange(0.01, 0.41, 0.01)), alpha=alpha
            )
            got = min_detectable(3.0, oracle, params)
            assert got is not None and got > previous
            previous = got

    def test_zero_delta_never_detected(self):
        params = quick_params(paired=True)
        with pytest.raises(ValueError):
            is_detectable(2.0, 0.0, OracleEstimator(), 0, params)

    def test_paired_zero_noise_difference(self):
        # paired seeds make identical stimuli produce identical estimates,
        # so a tiny candidate fails while the paired difference is zero
        params = quick_params(paired=True, alpha=0.05)
        est = SingleLevelEstimator()
        assert not is_detectable(2.0, 1e-9, est, 0, params)


class TestQuota:
    def test_quota_monotonicity(self):
        model = ConfidenceModel(mu0=np.log(1.5), sigma0=0.8, scale=2.0, levels=2)
        est = ParallelEstimator(params=ParallelParams(model=model))
        results = []
        for quota in (0.6, 0.9):
            params = quick_params(speeds=(2.0,), realizations=8, quota=quota)
            results.append(min_detectable(2.0, est, params))
        assert results[0] is not None
        assert results[1] is None or results[1] >= results[0]

    def test_reproducibility(self):
        model = ConfidenceModel(mu0=np.log(1.5), sigma0=0.8, scale=2.0, levels=2)
        est = ParallelEstimator(params=ParallelParams(model=model))
        params = quick_params(speeds=(1.5, 3.0), realizations=5)
        a = discrimination_curve(est, params)
        b = discrimination_curve(est, params)
        assert a == b


class TestCompare:
    def test_identical_estimators_identical_curves(self):
        params = quick_params(
            speeds=(1.0, 2.0, 3.0),
            delta_fractions=tuple(np.arange(0.01, 0.11, 0.01)),
        )
        rows, summaries = compare([OracleEstimator(), OracleEstimator()], params)
        first = [r["min_delta_pct"] for r in rows[:3]]
        second = [r["min_delta_pct"] for r in rows[3:]]
        assert first == second
        assert summaries[0]["mean"] == summaries[1]["mean"]

    def test_summary_excludes_out_of_range_speeds(self):
        curve = [(1.0, 10.0), (5.0, 20.0), (30.0, 50.0)]
        mean, var, gaps = curve_summary(curve, 1.0, 15.0)
        assert mean == pytest.approx(15.0)
        assert gaps == 0

    def test_summary_counts_gaps(self):
        curve = [(1.0, 10.0), (2.0, None), (3.0, 14.0)]
        mean, var, gaps = curve_summary(curve, 1.0, 15.0)
        assert gaps == 1
        assert mean == pytest.approx(12.0)

    def test_detectable_range_max(self):
        curve = [(1.0, 10.0), (2.0, 25.0), (4.0, 35.0), (8.0, None)]
        assert detectable_range_max(curve, 30.0) == 2.0
        assert detectable_range_max([(1.0, None)], 30.0) is None


class TestCsvOutputs:
    def test_curves_csv(self, tmp_path):
        rows = [
            {"method": "parallel", "L": 3, "v_obj": 1.0, "min_delta_pct": 8.0},
            {"method": "parallel", "L": 3, "v_obj": 2.0, "min_delta_pct": None},
        ]
        path = tmp_path / "curves.csv"
        save_curves(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "method,L,v_obj,min_delta_pct"
        assert lines[1] == "parallel,3,1,8"
        assert lines[2] == "parallel,3,2,"

    def test_summary_csv(self, tmp_path):
        summaries = [
            {"method": "serial", "L": 3, "mean": 15.5, "variance": 4.2,
             "range_lo": 1.0, "range_hi": 15.0, "gaps": 0}
        ]
        path = tmp_path / "summary.csv"
        save_summary(summaries, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "method,L,mean,variance,range_lo,range_hi"
        assert lines[1] == "serial,3,15.5,4.2,1,15"


class TestRuntimeReport:
    def test_parallel_report_structure(self):
        spec = SynthSpec(velocity=(2.0, 2.0), seed=0)
        seq = generate_sequence(spec)
        model = ConfidenceModel(mu0=np.log(1.5), sigma0=0.8, scale=2.0, levels=3)
        est = ParallelEstimator(params=ParallelParams(model=model))
        report = runtime_report(est, seq[0], seq[1])
        assert report.pixels == 128 * 128
        assert report.levels == 3
        assert len(report.per_level_seconds) == 3
        assert report.total_seconds >= max(s for _, s in report.per_level_seconds)
        assert report.concurrent_total_seconds is not None

    def test_serial_report(self):
        spec = SynthSpec(velocity=(2.0, 2.0), seed=0)
        seq = generate_sequence(spec)
        est = SerialEstimator(params=SerialParams(levels=2))
        report = runtime_report(est, seq[0], seq[1])
        assert report.levels == 2
        assert len(report.per_level_seconds) == 2
        assert report.merge_seconds == 0.0

    def test_single_level_close_to_plain_lk(self):
        # a one-level parallel run degenerates to plain LK plus a copy
        import time

        spec = SynthSpec(velocity=(1.0, 1.0), seed=0)
        seq = generate_sequence(spec)
        model = ConfidenceModel(mu0=np.log(1.5), sigma0=0.8, scale=2.0, levels=1)
        par = ParallelEstimator(params=ParallelParams(model=model))
        from speedflow.lkflow import lk_flow

        lk_flow(seq[0], seq[1])  # warm the kernels
        rep = runtime_report(par, seq[0], seq[1])
        t0 = time.perf_counter()
        lk_flow(seq[0], seq[1])
        plain = time.perf_counter() - t0
        # informational sanity: the merge is a copy, totals are comparable
        assert rep.total_seconds < plain * 3 + 0.05


class TestValidation:
    def test_bad_quota_rejected(self):
        with pytest.raises(ValueError):
            quick_params(quota=0.4)

    def test_deltas_must_increase(self):
        with pytest.raises(ValueError):
            quick_params(delta_fractions=(0.1, 0.05))

    def test_stimulus_bounds_guard(self):
        from speedflow.errors import StimulusError

        params = quick_params(speeds=(90.0,), delta_fractions=(0.5,))
        with pytest.raises(StimulusError):
            min_detectable(90.0, OracleEstimator(), params)
