"""Config tuning harness: measures the acceptance-style metrics for a stimulus/LK config."""
import sys, time
import numpy as np
import speedflow as sf
from speedflow.calibration import (SpeedSweep, measure_confidence_levels, fit_model,
                                   empirical_peak_speed, relative_confidence, derive_seed)
from speedflow.discrimination import (DiscriminationParams, ParallelEstimator, SerialEstimator,
                                      discrimination_curve, curve_summary, detectable_range_max)
from speedflow.fusion import ParallelParams, ConfidenceModel


def run(kind, dia, blur, sn, window, thr, iters, reals_cal=10, reals_disc=12, tag="", wsig=1.5, con=0.8, bg=0.1):
    t0 = time.time()
    lk = sf.LKParams(window=window, weight_sigma=wsig, iterations=iters, eig_threshold=thr)
    stim = sf.SynthSpec(kind=kind, diameter=dia, blur_sigma=blur, noise_sigma=sn, contrast=con, background=bg)
    sweep = SpeedSweep(speeds=tuple(np.geomspace(0.5, 20, 16)), realizations=reals_cal,
                       noise_sigma=sn, stimulus=stim)
    samples = measure_confidence_levels(sweep, [0, 1, 2], lk=lk)
    model = fit_model(samples, scale=2.0, levels=3)
    peaks = [empirical_peak_speed(samples[l]) for l in (0, 1, 2)]
    print(f"[{tag}] fit peak0={np.exp(model.mu0):.2f} sigma0={model.sigma0:.2f} "
          f"argmax={np.round(peaks,2)} ratios={peaks[1]/peaks[0]:.2f},{peaks[2]/peaks[1]:.2f}")
    for l in (0, 1, 2):
        print(f"  L{l}: " + " ".join(f"{s.v_r:.2g}:{s.k_mean:.2f}" for s in samples[l]))

    # range extension: min_detectable < 30% ladder per L
    ladder = tuple(1.0 * 1.15 ** i for i in range(22))   # 1 .. ~19
    ranges = {}
    for L in (1, 2, 3):
        m = ConfidenceModel(mu0=model.mu0, sigma0=model.sigma0, scale=2.0, levels=L)
        est = ParallelEstimator(params=ParallelParams(model=m, lk=lk))
        params = DiscriminationParams(speeds=ladder, realizations=reals_disc, stimulus=stim,
                                      delta_fractions=tuple(np.arange(0.02, 0.301, 0.02)))
        curve = discrimination_curve(est, params)
        ranges[L] = detectable_range_max(curve, 30.0)
    r1, r2, r3 = ranges[1], ranges[2], ranges[3]
    print(f"  ranges: L1={r1} L2={r2} L3={r3} ratios:"
          f" {None if not (r1 and r2) else round(r2/r1,2)}, {None if not (r2 and r3) else round(r3/r2,2)}")

    # discrimination comparison at 1..15
    params = DiscriminationParams(realizations=reals_disc, stimulus=stim)
    par = ParallelEstimator(params=ParallelParams(model=model, lk=lk))
    ser = SerialEstimator(params=sf.SerialParams(levels=3, lk=lk))
    out = {}
    for est in (par, ser):
        curve = discrimination_curve(est, params)
        mean, var, gaps = curve_summary(curve, 1, 15)
        out[est.name] = (mean, var, gaps)
        print(f"  {est.name}: " + " ".join(f"{v:g}:{'-' if p is None else round(p)}" for v, p in curve) +
              f"  mean={mean if mean is None else round(mean,1)} var={var if var is None else round(var,1)} gaps={gaps}")
    pm, pv, _ = out["parallel"]; sm, sv, _ = out["serial"]
    verdict = (pm is not None and sm is not None and pm < sm and pv < sv
               and abs(pm - 14.1) <= 6 and abs(sm - 15.5) <= 6)
    print(f"  A1 windows: par {pm and round(pm,1)} in [8.1,20.1]? serial {sm and round(sm,1)} in [9.5,21.5]? "
          f"orderings par<ser mean:{pm is not None and sm is not None and pm<sm} var:{pv is not None and sv is not None and pv<sv} -> {'PASS' if verdict else 'FAIL'}")
    print(f"  [{time.time()-t0:.0f}s]")


if __name__ == "__main__":
    import argparse
    ap = argparse.ArgumentParser()
    ap.add_argument("--kind", default="blob")
    ap.add_argument("--dia", type=float, default=16.0)
    ap.add_argument("--blur", type=float, default=0.0)
    ap.add_argument("--sn", type=float, default=0.035)
    ap.add_argument("--window", type=int, default=9)
    ap.add_argument("--thr", type=float, default=8e-4)
    ap.add_argument("--iters", type=int, default=3)
    ap.add_argument("--rc", type=int, default=10)
    ap.add_argument("--rd", type=int, default=12)
    ap.add_argument("--wsig", type=float, default=1.5)
    ap.add_argument("--con", type=float, default=0.8)
    ap.add_argument("--bg", type=float, default=0.1)
    a = ap.parse_args()
    run(a.kind, a.dia, a.blur, a.sn, a.window, a.thr, a.iters, a.rc, a.rd, wsig=a.wsig, con=a.con, bg=a.bg,
        tag=f"{a.kind}{a.dia:g}/b{a.blur:g}/sn{a.sn:g}/w{a.window}/t{a.thr:g}/i{a.iters}")
