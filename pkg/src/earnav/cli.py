"""Command-line interface.

Subcommands: synth, calibrate, track, fuse, eval, tone. Every run prints
the resolved configuration; exit codes are 0 (success), 2 (bad input),
3 (numerical failure).
"""

import argparse
import os
import sys
import wave

import numpy as np

from .angles import circular_diff
from .calibration import CalibrationError, fit_accel_calibration, \
    stationary_windows
from .datamodel import GRAVITY, DeviceTrace
from .experiments import comparison_drifts, run_seeded
from .fusion import load_gps_fixes, make_gps_fixes, write_gps_fixes
from .metrics import drift, heading_error, paired_t_test
from .pipeline import (CalibrationSet, METHODS, fused_track,
                       load_calibration, run_mixed_rate, save_calibration,
                       single_track)
from .synth import (corridor_scenario, generate, line_scenario, load_truth,
                    square_loop_scenario, write_truth)
from .trace_io import (ConfigError, RunConfig, format_report, load_config,
                       load_trace, resample, write_heading_series,
                       write_report, write_strides, write_trace, write_track)


def tone_frequency(heading_diff_deg):
    """Audio-feedback pitch for a heading mismatch, Hz.

    The input is folded into [0, 180] degrees; 0 degrees maps to
    3000 Hz and 180 degrees to 250 Hz, decreasing linearly.
    """
    d = abs(np.degrees(circular_diff(np.radians(heading_diff_deg), 0.0)))
    return 2750.0 * (180.0 - d) / 180.0 + 250.0


def render_tone_wav(frequencies, durations, path, sample_rate=44100,
                    amplitude=0.5):
    """Write a phase-continuous piecewise-constant-pitch sine as WAV.

    Mono, 16-bit, 44.1 kHz by default.
    """
    phase = 0.0
    chunks = []
    for f, dur in zip(frequencies, durations):
        n = int(round(dur * sample_rate))
        k = np.arange(n)
        chunks.append(np.sin(phase + 2.0 * np.pi * f * k / sample_rate))
        phase += 2.0 * np.pi * f * n / sample_rate
    samples = np.concatenate(chunks) if chunks else np.zeros(0)
    pcm = np.clip(samples * amplitude, -1.0, 1.0)
    pcm = (pcm * 32767.0).astype("<i2")
    with wave.open(path, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(sample_rate)
        wav.writeframes(pcm.tobytes())


def _resolve_config(args):
    config = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    config.validate()
    print("# resolved configuration")
    print(config.to_text(), end="")
    return config


def _phone_from_truth(truth_path, rate_hz):
    """Reference-heading trace built from a ground-truth sidecar file."""
    t, _, psi, _ = load_truth(truth_path)
    n = t.size
    return DeviceTrace(
        device_id="truth", rate_hz=rate_hz, t=t,
        acc=np.tile([0.0, 0.0, GRAVITY], (n, 1)), gyro=np.zeros((n, 3)),
        mag=np.column_stack([np.cos(psi), np.sin(psi), np.ones(n)]),
        ref_heading=psi)


def _load_reference(args, rate_hz):
    if args.reference == "truth":
        if not args.truth:
            raise ValueError("--reference truth requires --truth")
        return _phone_from_truth(args.truth, rate_hz)
    if args.phone:
        return load_trace(args.phone)
    return None


def _write_pipeline_outputs(result, args, config, extra=()):
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    write_track(result.track, os.path.join(out, "track.csv"))
    write_heading_series(result.heading, os.path.join(out, "heading.csv"))
    write_strides(result.strides, os.path.join(out, "strides.csv"))
    entries = [("method", result.heading.method),
               ("n_strides", len(result.strides)),
               ("total_distance_m", float(result.distance.sum())),
               ("duration_s", result.track.duration)]
    if args.truth:
        t, xy, psi, _ = load_truth(args.truth)
        rep = drift(result.track, (xy[-1, 0], xy[-1, 1]))
        herr = heading_error(result.heading, t, psi)
        entries += [("drift_m_per_s", rep.drift),
                    ("final_error_m", rep.drift * rep.duration),
                    ("heading_mae_deg", herr.mean_abs_error_deg),
                    ("heading_std_deg", herr.std_dev_deg)]
    else:
        rep = drift(result.track)
        entries += [("drift_from_origin_m_per_s", rep.drift)]
    entries += list(extra)
    report = format_report(entries)
    write_report(entries, os.path.join(out, "report.txt"))
    print(report, end="")


def cmd_synth(args):
    config = _resolve_config(args)
    common = dict(rate_hz=args.rate or config.rate_hz,
                  height=config.user_height_m, seed=config.seed,
                  noise_acc=args.noise_acc,
                  noise_gyro=np.radians(args.noise_gyro_deg),
                  noise_mag=args.noise_mag,
                  mag_offset_deg=args.mag_offset_deg,
                  gyro_bias_sigma=np.radians(args.gyro_bias_sigma_deg),
                  tilt_roll_deg=args.tilt_roll_deg,
                  tilt_pitch_deg=args.tilt_pitch_deg,
                  two_devices=not args.single_device)
    if args.scenario == "square":
        scenario = square_loop_scenario(side=args.size, **common)
    elif args.scenario == "corridor":
        scenario = corridor_scenario(length=args.size, laps=args.laps,
                                     **common)
    else:
        scenario = line_scenario(distance=args.size, **common)
    out = generate(scenario)
    os.makedirs(args.out_dir, exist_ok=True)
    write_trace(out.left, os.path.join(args.out_dir, "left.csv"))
    if out.right is not None:
        write_trace(out.right, os.path.join(args.out_dir, "right.csv"))
    write_trace(out.phone, os.path.join(args.out_dir, "phone.csv"))
    write_truth(out, os.path.join(args.out_dir, "truth.csv"))
    if args.gps:
        fixes = make_gps_fixes(out.truth_t, out.truth_xy,
                               period=config.gps_period_s,
                               sigma=config.gps_sigma_m, seed=config.seed)
        write_gps_fixes(fixes, os.path.join(args.out_dir, "gps.csv"))
    print(f"wrote scenario '{args.scenario}' ({len(out.left)} samples)"
          f" to {args.out_dir}")
    return 0


def cmd_calibrate(args):
    config = _resolve_config(args)
    trace = load_trace(args.trace)
    windows = stationary_windows(trace.t, trace.acc,
                                 tol=args.static_tol,
                                 min_duration=config.stationary_window_s)
    clips = [trace.acc[i0:i1] for i0, i1 in windows]
    if not clips:
        raise ValueError("no static clips found in calibration trace")
    calib, rms = fit_accel_calibration(clips)
    calset = CalibrationSet(accel=calib, accel_residual_rms=rms)
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "calibration.txt")
    save_calibration(calset, path)
    print(f"clips={len(clips)}")
    print("residual_definition=rms(||corrected_accel|| - g) over clip means")
    print(f"residual_rms={rms!r}")
    print(f"wrote {path}")
    return 0


def cmd_track(args):
    config = _resolve_config(args)
    trace = load_trace(args.trace)
    if args.rate:
        trace = resample(trace, args.rate)
    phone = _load_reference(args, trace.rate_hz)
    calset = load_calibration(args.calib) if args.calib else None
    result = single_track(trace, config, phone=phone, calset=calset,
                          method=args.method,
                          no_calibration=args.no_calibration)
    _write_pipeline_outputs(result, args, config)
    return 0


def cmd_fuse(args):
    config = _resolve_config(args)
    left = load_trace(args.left)
    if not args.right:
        raise ValueError("fused tracking requires two traces (--right)")
    right = load_trace(args.right)
    if args.rate:
        left = resample(left, args.rate)
    phone = _load_reference(args, left.rate_hz)
    calset_left = load_calibration(args.calib) if args.calib else None
    calset_right = (load_calibration(args.calib_right)
                    if args.calib_right else calset_left)
    gps = load_gps_fixes(args.gps) if args.gps else None
    kwargs = dict(phone=phone, calset_left=calset_left,
                  calset_right=calset_right, gps_fixes=gps,
                  method=args.method, no_calibration=args.no_calibration,
                  seed=config.seed)
    if abs(right.rate_hz - left.rate_hz) > 1e-9:
        result = run_mixed_rate(left, right, config, **kwargs)
    else:
        result = fused_track(left, right, config, **kwargs)
    _write_pipeline_outputs(result, args, config,
                            extra=[("gps_fixes", len(gps) if gps else 0)])
    return 0


def _eval_files(args, entries):
    from .trace_io import load_heading_series, load_track
    t, xy, psi, _ = load_truth(args.truth)
    ref = (xy[-1, 0], xy[-1, 1])
    track_a = load_track(args.track)
    rep_a = drift(track_a, ref)
    entries += [("drift_a_m_per_s", rep_a.drift),
                ("final_error_a_m", rep_a.drift * rep_a.duration)]
    if args.track_b:
        rep_b = drift(load_track(args.track_b), ref)
        entries += [("drift_b_m_per_s", rep_b.drift),
                    ("final_error_b_m", rep_b.drift * rep_b.duration)]
    err_a = err_b = None
    if args.heading:
        err_a = heading_error(load_heading_series(args.heading), t, psi)
        entries += [("heading_mae_a_deg", err_a.mean_abs_error_deg),
                    ("heading_std_a_deg", err_a.std_dev_deg)]
    if args.heading_b:
        err_b = heading_error(load_heading_series(args.heading_b), t, psi)
        entries += [("heading_mae_b_deg", err_b.mean_abs_error_deg),
                    ("heading_std_b_deg", err_b.std_dev_deg)]
    if err_a is not None and err_b is not None:
        tt = paired_t_test(err_a.errors_deg, err_b.errors_deg)
        entries += [("t_statistic", tt.t_statistic),
                    ("significant", tt.significant),
                    ("t_critical", tt.critical)]


def _eval_seeds(args, config, entries):
    seeds = list(range(config.seed, config.seed + args.seeds))
    rows = run_seeded(comparison_drifts, seeds, parallel=not args.serial)
    fused = np.array([r["fused"] for r in rows])
    single = np.array([r["single"] for r in rows])
    gyro = np.array([r["gyro"] for r in rows])
    entries += [("seeds", args.seeds),
                ("mean_drift_fused_m_per_s", float(fused.mean())),
                ("mean_drift_single_m_per_s", float(single.mean())),
                ("mean_drift_gyro_m_per_s", float(gyro.mean()))]
    for name, a, b in (("fused_vs_single", fused, single),
                       ("single_vs_gyro", single, gyro)):
        tt = paired_t_test(a, b)
        entries += [(f"t_{name}", tt.t_statistic),
                    (f"significant_{name}", tt.significant)]


def cmd_eval(args):
    config = _resolve_config(args)
    entries = []
    if args.seeds:
        _eval_seeds(args, config, entries)
    else:
        if not (args.truth and args.track):
            raise ValueError("eval needs --seeds N or --truth and --track")
        _eval_files(args, entries)
    report = format_report(entries)
    os.makedirs(args.out_dir, exist_ok=True)
    write_report(entries, os.path.join(args.out_dir, "eval_report.txt"))
    print(report, end="")
    return 0


def cmd_tone(args):
    _resolve_config(args)
    if args.diff_deg is not None:
        freqs = np.array([tone_frequency(args.diff_deg)])
        times = np.array([0.0])
        durations = np.array([args.note_duration])
    else:
        if not args.heading:
            raise ValueError("tone needs --diff-deg or --heading and"
                             " --target-deg")
        from .trace_io import load_heading_series
        series = load_heading_series(args.heading)
        diffs = np.degrees(circular_diff(series.psi,
                                         np.radians(args.target_deg)))
        freqs = np.array([tone_frequency(d) for d in diffs])
        times = series.t
        durations = np.diff(np.append(times, times[-1]
                                      + (times[-1] - times[-2]
                                         if times.size > 1
                                         else args.note_duration)))
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, "tone.csv")
    lines = ["t,frequency_hz"]
    lines += [f"{times[k]:.9f},{float(freqs[k])!r}"
              for k in range(times.size)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {path}")
    if args.wav:
        render_tone_wav(freqs, durations, args.wav)
        print(f"wrote {args.wav}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="earnav",
        description="Earable inertial navigation pipeline")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, rate=True):
        p.add_argument("--config", help="run configuration file")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--out-dir", default=".", help="output directory")
        if rate:
            p.add_argument("--rate", type=float,
                           help="resample inputs to this rate, Hz")

    p = sub.add_parser("synth", help="generate a synthetic walk")
    common(p)
    p.add_argument("--scenario", choices=("square", "corridor", "line"),
                   default="square")
    p.add_argument("--size", type=float, default=10.0,
                   help="side / corridor length / line distance, m")
    p.add_argument("--laps", type=int, default=3)
    p.add_argument("--noise-acc", type=float, default=0.0)
    p.add_argument("--noise-gyro-deg", type=float, default=0.0)
    p.add_argument("--noise-mag", type=float, default=0.0)
    p.add_argument("--mag-offset-deg", type=float, default=0.0)
    p.add_argument("--gyro-bias-sigma-deg", type=float, default=0.0)
    p.add_argument("--tilt-roll-deg", type=float, default=0.0)
    p.add_argument("--tilt-pitch-deg", type=float, default=0.0)
    p.add_argument("--single-device", action="store_true")
    p.add_argument("--gps", action="store_true",
                   help="also write synthetic GPS fixes")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate", help="fit accelerometer calibration")
    common(p, rate=False)
    p.add_argument("--trace", required=True,
                   help="static multi-orientation recording")
    p.add_argument("--static-tol", type=float, default=0.3,
                   help="stationarity tolerance, m/s^2")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("track", help="single-device tracking")
    common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--phone", help="phone trace with reference heading")
    p.add_argument("--truth", help="ground-truth sidecar file")
    p.add_argument("--calib", help="calibration file from `calibrate`")
    p.add_argument("--method", choices=METHODS, default="complementary")
    p.add_argument("--no-calibration", action="store_true")
    p.add_argument("--reference", choices=("phone", "truth"),
                   default="phone")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("fuse", help="two-device tracking with fusion")
    common(p)
    p.add_argument("--left", required=True)
    p.add_argument("--right")
    p.add_argument("--phone")
    p.add_argument("--truth")
    p.add_argument("--calib", help="left-device calibration file")
    p.add_argument("--calib-right")
    p.add_argument("--gps", help="GPS fixes file")
    p.add_argument("--method", choices=METHODS, default="complementary")
    p.add_argument("--no-calibration", action="store_true")
    p.add_argument("--reference", choices=("phone", "truth"),
                   default="phone")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="evaluate tracks or run seeded trials")
    common(p, rate=False)
    p.add_argument("--truth")
    p.add_argument("--track")
    p.add_argument("--track-b")
    p.add_argument("--heading")
    p.add_argument("--heading-b")
    p.add_argument("--seeds", type=int,
                   help="run this many seeded comparison trials")
    p.add_argument("--serial", action="store_true",
                   help="disable process fan-out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("tone", help="audio-feedback pitch")
    common(p, rate=False)
    p.add_argument("--diff-deg", type=float,
                   help="single heading mismatch, degrees")
    p.add_argument("--heading", help="heading series file")
    p.add_argument("--target-deg", type=float, default=0.0)
    p.add_argument("--note-duration", type=float, default=0.5)
    p.add_argument("--wav", help="also render a WAV file here")
    p.set_defaults(func=cmd_tone)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CalibrationError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
