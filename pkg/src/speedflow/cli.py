"""Command-line interface: synth, flow, calibrate, discriminate, compare, bench.

All randomness flows from --seed. Parameters can also come from a
key=value config file (--config); explicit command-line flags win.
Module errors map to distinct exit codes: 2 usage/validation, 3 stimulus
or pyramid domain errors, 4 file I/O and format errors, 5 fit errors.
"""

import argparse
import os
import sys

import numpy as np

from . import calibration, discrimination, fusion, imgseq, lkflow, pyramid
from .coarse_to_fine import SerialParams, serial_flow
from .errors import SpeedflowError


def _parse_pair(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected U,V - got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_span(text):
    parts = text.split(":")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected LO:HI - got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_grid(text):
    """lo:hi:n[:lin|log] -> tuple of speeds."""
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise argparse.ArgumentTypeError(f"expected LO:HI:N[:lin|log] - got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    kind = parts[3] if len(parts) == 4 else "lin"
    if kind == "log":
        return tuple(np.geomspace(lo, hi, n))
    if kind == "lin":
        return tuple(np.linspace(lo, hi, n))
    raise argparse.ArgumentTypeError(f"grid kind must be lin or log, not {kind!r}")


def _add_stimulus_args(p):
    d = imgseq.SynthSpec()
    p.add_argument("--size", type=int, default=d.size, help="frame side in pixels")
    p.add_argument("--object", dest="kind", choices=imgseq.OBJECT_KINDS, default=d.kind)
    p.add_argument("--diameter", type=float, default=d.diameter)
    p.add_argument("--contrast", type=float, default=d.contrast)
    p.add_argument("--background", type=float, default=d.background)
    p.add_argument("--noise", type=float, default=d.noise_sigma, help="noise sigma")
    p.add_argument("--blur", type=float, default=d.blur_sigma, help="optics blur sigma")


def _add_lk_args(p):
    d = lkflow.LKParams()
    p.add_argument("--window", type=int, default=d.window)
    p.add_argument("--weight-sigma", type=float, default=d.weight_sigma)
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--eig-threshold", type=float, default=d.eig_threshold)


def _stimulus(args, velocity=(0.0, 0.0), frames=2, seed=0):
    return imgseq.SynthSpec(
        size=args.size,
        kind=args.kind,
        diameter=args.diameter,
        contrast=args.contrast,
        background=args.background,
        velocity=velocity,
        frames=frames,
        noise_sigma=args.noise,
        seed=seed,
        blur_sigma=args.blur,
    )


def _lk_params(args):
    return lkflow.LKParams(
        window=args.window,
        weight_sigma=args.weight_sigma,
        iterations=args.iterations,
        eig_threshold=args.eig_threshold,
    )


def _model_for(args, levels):
    if getattr(args, "model", None):
        return fusion.load_model(args.model, levels=levels)
    return fusion.default_model(levels=levels)


def _estimator(method, args, levels):
    lk = _lk_params(args)
    if method == "parallel":
        params = fusion.ParallelParams(model=_model_for(args, levels), lk=lk)
        return discrimination.ParallelEstimator(params=params, jobs=args.jobs)
    if method == "serial":
        return discrimination.SerialEstimator(
            params=SerialParams(levels=levels, scale=args.scale, lk=lk)
        )
    if method in ("lk", "single", "level0"):
        return discrimination.SingleLevelEstimator(level=0, scale=args.scale, lk=lk)
    if method == "oracle":
        return discrimination.OracleEstimator()
    raise argparse.ArgumentTypeError(f"unknown method {method!r}")


# -- subcommands -------------------------------------------------------------


def cmd_synth(args):
    spec = _stimulus(args, velocity=args.speed, frames=args.frames, seed=args.seed)
    seq = imgseq.generate_sequence(spec)
    os.makedirs(args.out, exist_ok=True)
    paths = imgseq.save_sequence(seq, args.out)
    with open(os.path.join(args.out, "truth.txt"), "w") as fh:
        fh.write(f"u={spec.velocity[0]!r}\n")
        fh.write(f"v={spec.velocity[1]!r}\n")
    if args.dump_pyramid:
        os.makedirs(args.dump_pyramid, exist_ok=True)
        pyr = pyramid.build_pyramid(seq[0], args.levels, args.scale)
        pyramid.save_levels(pyr, args.dump_pyramid)
    print(f"wrote {len(paths)} frames to {args.out}")
    return 0


def _load_pair(args):
    if args.frames_dir:
        names = sorted(
            n for n in os.listdir(args.frames_dir) if n.endswith(".pgm")
        )
        if len(names) < 2:
            raise SpeedflowError(f"{args.frames_dir}: need at least two PGM frames")
        seq = imgseq.load_sequence(
            [os.path.join(args.frames_dir, n) for n in names[:2]]
        )
        return seq[0], seq[1]
    if not (args.prev and args.next):
        raise SpeedflowError("flow needs --frames DIR or --prev and --next")
    return imgseq.load_pgm(args.prev), imgseq.load_pgm(args.next)


def cmd_flow(args):
    prev, nxt = _load_pair(args)
    lk = _lk_params(args)
    if args.method == "lk":
        field = lkflow.lk_flow(prev, nxt, lk)
    elif args.method == "serial":
        field = serial_flow(
            prev, nxt, SerialParams(levels=args.levels, scale=args.scale, lk=lk)
        )
    elif args.method == "parallel":
        if not args.model:
            raise SpeedflowError("parallel flow needs --model FILE")
        params = fusion.ParallelParams(
            model=fusion.load_model(args.model, levels=args.levels), lk=lk
        )
        field = fusion.parallel_flow(prev, nxt, params, jobs=args.jobs)
    else:
        raise SpeedflowError(f"unknown method {args.method!r}")
    lkflow.save_flow(field, args.out)
    print(f"wrote flow ({field.valid.sum()} valid px) to {args.out}")
    return 0


def cmd_calibrate(args):
    sweep = calibration.SpeedSweep(
        speeds=args.speeds,
        realizations=args.realizations,
        noise_sigma=args.noise,
        stimulus=_stimulus(args, seed=args.seed),
    )
    lk = _lk_params(args)
    samples = calibration.measure_confidence_levels(
        sweep, range(args.levels), lk=lk, scale=args.scale, jobs=args.jobs
    )
    if args.csv:
        calibration.save_samples(samples, args.csv)
    model = calibration.fit_model(samples, scale=args.scale, levels=args.levels)
    fusion.save_model(model, args.out)
    print(
        f"fitted mu0={model.mu0:.4f} sigma0={model.sigma0:.4f} "
        f"(peak {model.peak_speed(0):.2f} px/frame) -> {args.out}"
    )
    return 0


def _discrimination_params(args):
    return discrimination.DiscriminationParams(
        alpha=args.alpha,
        speeds=args.speeds,
        delta_fractions=tuple(
            np.arange(args.deltas[0], args.deltas[1] + 1e-9, args.delta_step) / 100.0
        ),
        realizations=args.realizations,
        quota=args.quota,
        stimulus=_stimulus(args, seed=args.seed),
    )


def cmd_discriminate(args):
    params = _discrimination_params(args)
    est = _estimator(args.method, args, args.levels)
    curve_rows, summaries = discrimination.compare(
        [est], params, range_lo=args.range[0], range_hi=args.range[1]
    )
    discrimination.save_curves(curve_rows, args.out)
    row = summaries[0]
    mean = "none" if row["mean"] is None else f"{row['mean']:.2f}"
    var = "none" if row["variance"] is None else f"{row['variance']:.2f}"
    print(
        f"{row['method']} L={row['L']}: mean={mean} variance={var} "
        f"gaps={row['gaps']} over [{args.range[0]:g},{args.range[1]:g}] -> {args.out}"
    )
    if args.summary:
        discrimination.save_summary(summaries, args.summary)
    return 0


def cmd_compare(args):
    params = _discrimination_params(args)
    estimators = [_estimator(m.strip(), args, args.levels) for m in args.methods.split(",")]
    curve_rows, summaries = discrimination.compare(
        estimators, params, range_lo=args.range[0], range_hi=args.range[1]
    )
    discrimination.save_curves(curve_rows, args.out_curves)
    discrimination.save_summary(summaries, args.out_summary)
    for row in summaries:
        mean = "none" if row["mean"] is None else f"{row['mean']:.2f}"
        var = "none" if row["variance"] is None else f"{row['variance']:.2f}"
        print(f"{row['method']} L={row['L']}: mean={mean} variance={var} gaps={row['gaps']}")
    return 0


def cmd_bench(args):
    spec = _stimulus(args, velocity=args.speed, seed=args.seed)
    seq = imgseq.generate_sequence(spec)
    est = _estimator(args.method, args, args.levels)
    report = discrimination.runtime_report(est, seq[0], seq[1])
    lines = [f"{k},{v}" for k, v in report.rows()]
    print("\n".join(lines))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("metric,value\n")
            fh.write("\n".join(lines) + "\n")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="speedflow",
        description="Multi-scale optical-flow speed estimation and benchmarks",
    )
    parser.add_argument("--config", help="key=value file with defaults for the subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic moving-object sequence")
    _add_stimulus_args(p)
    p.add_argument("--speed", type=_parse_pair, default=(10.0, 10.0), help="velocity U,V")
    p.add_argument("--frames", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dump-pyramid", help="also dump pyramid levels of frame 0 here")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--scale", type=float, default=2.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("flow", help="compute dense flow for a frame pair")
    p.add_argument("--frames", dest="frames_dir", help="directory of PGM frames")
    p.add_argument("--prev")
    p.add_argument("--next")
    p.add_argument("--method", choices=("lk", "serial", "parallel"), default="lk")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--scale", type=float, default=2.0)
    p.add_argument("--model", help="confidence model file (parallel)")
    p.add_argument("--jobs", type=int, default=1)
    _add_lk_args(p)
    p.add_argument("--out", required=True, help="flow CSV path")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("calibrate", help="measure confidence curves and fit the model")
    _add_stimulus_args(p)
    _add_lk_args(p)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--scale", type=float, default=2.0)
    p.add_argument("--speeds", type=_parse_grid, default=tuple(np.geomspace(0.5, 20, 40)),
                   help="LO:HI:N[:log|lin] sweep grid")
    p.add_argument("--realizations", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv", help="also write measured samples CSV")
    p.add_argument("--out", required=True, help="model file path")
    p.set_defaults(func=cmd_calibrate)

    for name in ("discriminate", "compare"):
        p = sub.add_parser(
            name,
            help="speed-discrimination benchmark"
            if name == "discriminate"
            else "benchmark several estimators",
        )
        _add_stimulus_args(p)
        _add_lk_args(p)
        if name == "discriminate":
            p.add_argument("--method", default="parallel")
            p.add_argument("--out", required=True, help="curve CSV")
            p.add_argument("--summary", help="optional summary CSV")
        else:
            p.add_argument("--methods", default="serial,parallel")
            p.add_argument("--out-curves", required=True)
            p.add_argument("--out-summary", required=True)
        p.add_argument("--levels", "--L", dest="levels", type=int, default=3)
        p.add_argument("--scale", type=float, default=2.0)
        p.add_argument("--model", help="confidence model file (default: packaged)")
        p.add_argument("--speeds", type=_parse_grid,
                       default=tuple(np.geomspace(1.0, 15.0, 12)))
        p.add_argument("--range", type=_parse_span, default=(1.0, 15.0),
                       help="summary range LO:HI")
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--quota", type=float, default=0.90)
        p.add_argument("--realizations", type=int, default=16)
        p.add_argument("--deltas", type=_parse_span, default=(2.0, 60.0),
                       help="candidate range LO:HI in percent")
        p.add_argument("--delta-step", type=float, default=1.0)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)
        p.set_defaults(func=cmd_discriminate if name == "discriminate" else cmd_compare)

    p = sub.add_parser("bench", help="wall-clock runtime report for one estimator")
    _add_stimulus_args(p)
    _add_lk_args(p)
    p.add_argument("--method", default="parallel")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--scale", type=float, default=2.0)
    p.add_argument("--model", help="confidence model file (default: packaged)")
    p.add_argument("--speed", type=_parse_pair, default=(10.0, 10.0))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help="optional CSV output")
    p.set_defaults(func=cmd_bench)

    return parser


def _apply_config(parser, argv):
    """Inject key=value config-file entries as subcommand defaults."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        parser.error("--config needs a file path")
    path = argv[idx + 1]
    try:
        with open(path) as fh:
            entries = {}
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    parser.error(f"{path}: expected key=value, got {line!r}")
                key, _, val = line.partition("=")
                entries[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    command = next((a for a in argv if not a.startswith("-") and a != path), None)
    if command is None:
        parser.error("--config requires a subcommand")
    sub_actions = [
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    ]
    subparser = sub_actions[0].choices.get(command)
    if subparser is None:
        parser.error(f"unknown subcommand {command!r}")
    defaults = {}
    by_dest = {a.dest: a for a in subparser._actions}
    for key, val in entries.items():
        action = by_dest.get(key)
        if action is None:
            parser.error(f"{path}: unknown parameter {key!r} for {command}")
        defaults[key] = action.type(val) if callable(action.type) else val
    subparser.set_defaults(**defaults)
    return argv


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    argv = _apply_config(parser, argv)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpeedflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
