"""Confidence measurement and model fitting."""

import numpy as np
import pytest

from speedflow.calibration import (
    ConfidenceSample,
    SpeedSweep,
    derive_seed,
    fit_model,
    measure_confidence,
    measure_confidence_levels,
    relative_confidence,
)
from speedflow.errors import FitError
from speedflow.fusion import ConfidenceModel, model_confidence
from speedflow.imgseq import SynthSpec


class TestRelativeConfidence:
    def test_exact_estimate_scores_one(self):
        assert relative_confidence(10.0, 10.0) == 1.0

    def test_partial_estimate(self):
        assert relative_confidence(10.0, 8.0) == pytest.approx(0.8)

    def test_clamped_to_zero(self):
        assert relative_confidence(10.0, 25.0) == 0.0
        assert relative_confidence(1.0, 2.5) == 0.0

    def test_missing_estimate_is_zero(self):
        assert relative_confidence(5.0, None) == 0.0

    def test_always_in_unit_interval(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            v_r = rng.uniform(0.1, 20)
            v_e = rng.uniform(-5, 40)
            assert 0.0 <= relative_confidence(v_r, v_e) <= 1.0


class TestSweepValidation:
    def test_speeds_must_increase(self):
        with pytest.raises(ValueError):
            SpeedSweep(speeds=(2.0, 1.0))

    def test_speeds_must_be_positive(self):
        with pytest.raises(ValueError):
            SpeedSweep(speeds=(0.0, 1.0))

    def test_direction_normalized(self):
        sweep = SpeedSweep(speeds=(1.0,), direction=(3.0, 4.0))
        assert np.hypot(*sweep.direction) == pytest.approx(1.0)

    def test_stimulus_bounds_checked_before_running(self):
        from speedflow.errors import StimulusError

        sweep = SpeedSweep(speeds=(200.0,), realizations=1)
        with pytest.raises(StimulusError):
            measure_confidence(sweep, 0)


class TestSeeds:
    def test_derive_seed_stable_and_distinct(self):
        assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
        assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)
        assert derive_seed(0, 1) != derive_seed(1, 1)


class TestFitModel:
    def _synthetic_samples(self, mu0, sigma0, scale=2.0, levels=3):
        model = ConfidenceModel(mu0=mu0, sigma0=sigma0, scale=scale, levels=levels)
        speeds = np.geomspace(0.5, 20.0, 25)
        samples = {}
        for level in range(levels):
            samples[level] = [
                ConfidenceSample(
                    level=level,
                    v_r=float(v),
                    realizations=1,
                    k_mean=float(model_confidence(model, level, float(v))),
                    k_std=0.0,
                )
                for v in speeds
            ]
        return samples

    def test_recovers_exact_model_parameters(self):
        samples = self._synthetic_samples(np.log(1.5), 0.6)
        fit = fit_model(samples, scale=2.0, levels=3)
        assert fit.mu0 == pytest.approx(np.log(1.5), abs=1e-3)
        assert fit.sigma0 == pytest.approx(0.6, abs=1e-3)

    def test_recovery_across_parameter_range(self):
        rng = np.random.default_rng(1)
        for _ in range(4):
            mu0 = float(rng.uniform(np.log(0.5), np.log(4.0)))
            sigma0 = float(rng.uniform(0.3, 1.5))
            fit = fit_model(self._synthetic_samples(mu0, sigma0), scale=2.0, levels=3)
            assert fit.mu0 == pytest.approx(mu0, abs=1e-3)
            assert fit.sigma0 == pytest.approx(sigma0, abs=1e-3)

    def test_refinement_never_worse_than_grid(self):
        # noisy samples: the compass stage may only improve the objective
        rng = np.random.default_rng(3)
        samples = self._synthetic_samples(np.log(1.2), 0.7)
        for level in samples:
            samples[level] = [
                ConfidenceSample(
                    level=s.level,
                    v_r=s.v_r,
                    realizations=1,
                    k_mean=float(np.clip(s.k_mean + rng.normal(0, 0.05), 0, 1)),
                    k_std=0.0,
                )
                for s in samples[level]
            ]
        from speedflow.calibration import _sse

        fit = fit_model(samples, scale=2.0, levels=3)
        flat = (
            np.array([np.log(s.v_r) for l in samples for s in samples[l]]),
            np.array([float(l) for l in samples for _ in samples[l]]),
            np.array([s.k_mean for l in samples for s in samples[l]]),
        )
        fitted_err = _sse(fit.mu0, fit.sigma0, 2.0, flat)
        best_grid = min(
            _sse(mu, sig, 2.0, flat)
            for mu in np.linspace(np.log(0.1), np.log(10), 64)
            for sig in np.linspace(0.05, 3.0, 60)
        )
        assert fitted_err <= best_grid + 1e-12

    def test_degenerate_samples_raise(self):
        samples = {
            0: [
                ConfidenceSample(level=0, v_r=v, realizations=1, k_mean=0.01, k_std=0.0)
                for v in (0.5, 1.0, 2.0, 4.0)
            ]
        }
        with pytest.raises(FitError):
            fit_model(samples, scale=2.0, levels=1)


@pytest.fixture(scope="module")
def small_sweep_samples():
    sweep = SpeedSweep(
        speeds=(0.7, 1.4, 2.8, 5.6, 11.0),
        realizations=6,
        stimulus=SynthSpec(seed=42),
    )
    return measure_confidence_levels(sweep, [0, 1, 2])


class TestMeasurement:
    def test_levels_peak_at_increasing_speeds(self, small_sweep_samples):
        # the coarse level must do comparatively better at fast speeds
        samples = small_sweep_samples
        k0 = {s.v_r: s.k_mean for s in samples[0]}
        k2 = {s.v_r: s.k_mean for s in samples[2]}
        assert k0[0.7] > k2[0.7] - 0.15     # fine level holds slow speeds
        assert k2[11.0] > k0[11.0] + 0.3    # coarse level owns fast speeds

    def test_slow_speed_at_coarse_level_in_left_tail(self, small_sweep_samples):
        samples = small_sweep_samples
        k2 = {s.v_r: s.k_mean for s in samples[2]}
        assert k2[0.7] < max(k2.values()) - 0.05

    def test_samples_match_single_level_api(self):
        sweep = SpeedSweep(speeds=(1.0, 3.0), realizations=3, stimulus=SynthSpec(seed=7))
        combined = measure_confidence_levels(sweep, [0, 1])
        single = measure_confidence(sweep, 1)
        assert [s.k_mean for s in single] == [s.k_mean for s in combined[1]]

    def test_jobs_do_not_change_results(self):
        sweep = SpeedSweep(speeds=(1.0, 4.0), realizations=3, stimulus=SynthSpec(seed=3))
        seq_result = measure_confidence_levels(sweep, [0, 1], jobs=1)
        par_result = measure_confidence_levels(sweep, [0, 1], jobs=4)
        for level in (0, 1):
            assert [s.k_mean for s in seq_result[level]] == [
                s.k_mean for s in par_result[level]
            ]


def test_samples_csv_round_trip(tmp_path):
    from speedflow.calibration import load_samples, save_samples

    samples = {
        0: [ConfidenceSample(level=0, v_r=1.0, realizations=5, k_mean=0.9, k_std=0.05)],
        1: [ConfidenceSample(level=1, v_r=2.0, realizations=5, k_mean=0.8, k_std=0.02)],
    }
    path = tmp_path / "samples.csv"
    save_samples(samples, path)
    loaded = load_samples(path)
    assert loaded[0][0].k_mean == pytest.approx(0.9)
    assert loaded[1][0].v_r == pytest.approx(2.0)
    header = path.read_text().splitlines()[0]
    assert header == "level,v_r,k_mean,k_std,n"
