"""Quick scan: detectable-range ladder per L for several configs."""
import sys, time
import numpy as np
import speedflow as sf
from speedflow.calibration import SpeedSweep, measure_confidence_levels, fit_model
from speedflow.discrimination import (DiscriminationParams, ParallelEstimator,
                                      discrimination_curve, detectable_range_max)
from speedflow.fusion import ParallelParams, ConfidenceModel

def ranges_for(dia, sn, thr, w, ws, tau, cont, iters=6, rd=10):
    t0=time.time()
    lk = sf.LKParams(window=w, weight_sigma=ws, iterations=iters, eig_threshold=thr,
                     max_residual=tau, min_content_ratio=cont)
    stim = sf.SynthSpec(kind='blob', diameter=dia, blur_sigma=0.0, noise_sigma=sn)
    sweep = SpeedSweep(speeds=tuple(np.geomspace(0.5, 20, 12)), realizations=8, noise_sigma=sn, stimulus=stim)
    samples = measure_confidence_levels(sweep, [0,1,2], lk=lk)
    model = fit_model(samples, scale=2.0, levels=3)
    ladder = tuple(1.0 * 1.15 ** i for i in range(22))
    rs = {}
    for L in (1,2,3):
        m = ConfidenceModel(mu0=model.mu0, sigma0=model.sigma0, scale=2.0, levels=L)
        est = ParallelEstimator(params=ParallelParams(model=m, lk=lk))
        params = DiscriminationParams(speeds=ladder, realizations=rd, stimulus=stim,
                                      delta_fractions=tuple(np.arange(0.02, 0.301, 0.02)))
        rs[L] = detectable_range_max(discrimination_curve(est, params), 30.0)
    r1,r2,r3 = rs[1],rs[2],rs[3]
    q12 = None if not (r1 and r2) else r2/r1
    q23 = None if not (r2 and r3) else r3/r2
    print(f'd={dia} sn={sn} thr={thr:g} w={w}/{ws} tau={tau} cont={cont}: '
          f'R={None if r1 is None else round(r1,2)},{None if r2 is None else round(r2,2)},{None if r3 is None else round(r3,2)} '
          f'ratios={None if q12 is None else round(q12,2)},{None if q23 is None else round(q23,2)} [{time.time()-t0:.0f}s]')
    return rs

if __name__ == '__main__':
    for args in [
        (16, 0.028, 9e-4, 7, 1.75, 2.0, 0.4),
        (16, 0.028, 9e-4, 7, 1.75, 1.0, 0.25),
        (16, 0.028, 9e-4, 7, 2.3, 1.0, 0.4),
        (14, 0.028, 1.1e-3, 7, 1.75, 1.0, 0.4),
    ]:
        ranges_for(*args)
