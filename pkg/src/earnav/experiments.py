"""Seeded Monte-Carlo experiments shared by the eval command and tests.

Each experiment maps one integer seed to a small dict of scalar results,
so runs can fan out across processes and be re-assembled in seed order
deterministically.
"""

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .displacement import Track
from .fusion import gps_position_filter, make_gps_fixes
from .metrics import drift, heading_error
from .pipeline import fused_track, run_mixed_rate, single_track
from .synth import SynthScenario, generate, square_loop_scenario
from .trace_io import RunConfig, resample


def comparison_scenario(seed, side=10.0):
    """Closed square loop with realistic noise and per-device gyro bias."""
    return square_loop_scenario(
        side=side, noise_acc=0.05, noise_gyro=np.radians(0.3),
        noise_mag=0.03, gyro_bias_sigma=np.radians(1.0), seed=seed)


def comparison_drifts(seed, config=None):
    """Drift of fused, single complementary, and single gyro tracking.

    The single-device numbers average the left-only and right-only runs
    so they measure single-earable performance rather than one device's
    particular noise draw.
    """
    config = config if config is not None else RunConfig(seed=seed)
    out = generate(comparison_scenario(seed))
    ref = (out.truth_xy[-1, 0], out.truth_xy[-1, 1])
    fused = fused_track(out.left, out.right, config, phone=out.phone,
                        seed=seed)

    def single_drift(method):
        runs = [single_track(tr, config, phone=out.phone, method=method)
                for tr in (out.left, out.right)]
        return float(np.mean([drift(r.track, ref).drift for r in runs]))

    return {"fused": drift(fused.track, ref).drift,
            "single": single_drift("complementary"),
            "gyro": single_drift("gyro")}


def mixed_rate_scenario(seed, length=10.0, segments=6):
    """Indoor-style zigzag with sharp 90 degree turns and mild noise.

    The walk only moves forward (no out-and-back leg whose heading
    errors would cancel in the final position), and the segment length
    carries a seed-dependent jitter so the sharp turns land at random
    phases of the sample grid. Both choices make low-rate gyro
    decimation degrade turn integration in expectation instead of at
    one fixed (possibly lucky) grid alignment.
    """
    leg = length + np.random.default_rng([seed, 11]).uniform(0.0, 0.5)
    pts = [(0.0, 0.0)]
    for k in range(segments):
        x, y = pts[-1]
        pts.append((x + leg, y) if k % 2 == 0 else (x, y + leg))
    return SynthScenario(
        waypoints=tuple(pts), turn_duration_s=0.25, noise_acc=0.05,
        noise_gyro=np.radians(0.1), noise_mag=0.01,
        gyro_bias_sigma=np.radians(0.2), seed=seed)


def mixed_rate_drift(seed, right_hz, config=None):
    """Fused drift with the right device downsampled to right_hz."""
    config = config if config is not None else RunConfig(seed=seed)
    out = generate(mixed_rate_scenario(seed))
    right = resample(out.right, right_hz)
    ref = (out.truth_xy[-1, 0], out.truth_xy[-1, 1])
    result = run_mixed_rate(out.left, right, config, phone=out.phone,
                            seed=seed)
    return drift(result.track, ref).drift


def gps_correction_error(seed, duration=300.0, rate_hz=1.0,
                         drift_rate=0.5, speed=1.0, period=30.0,
                         sigma=3.9, n_particles=1000, process_noise=2.0):
    """Time-averaged position error of GPS-corrected drifting DR.

    The truth path is a straight walk; the dead-reckoned input drifts
    away from it at drift_rate meters per second in a seed-random
    direction.
    """
    t = np.arange(int(round(duration * rate_hz)) + 1) / rate_hz
    truth = np.column_stack([speed * t, np.zeros(t.size)])
    rng = np.random.default_rng([seed, 7])
    ang = rng.uniform(0.0, 2.0 * np.pi)
    dr = truth + np.outer(drift_rate * t, [np.cos(ang), np.sin(ang)])
    fixes = make_gps_fixes(t, truth, period=period, sigma=sigma, seed=seed)
    corrected = gps_position_filter(Track(t=t, xy=dr), fixes,
                                    n_particles=n_particles,
                                    process_noise=process_noise, seed=seed)
    return float(np.mean(np.linalg.norm(corrected.xy - truth, axis=1)))


def ablation_scenario(seed, hard_iron_deg=25.0):
    return square_loop_scenario(
        side=10.0, noise_acc=0.05, noise_gyro=np.radians(0.3),
        noise_mag=0.03, mag_offset_deg=hard_iron_deg, seed=seed)


def ablation_heading_errors(seed, config=None, hard_iron_deg=25.0):
    """Mean heading error with and without magnetometer calibration."""
    config = config if config is not None else RunConfig(seed=seed)
    out = generate(ablation_scenario(seed, hard_iron_deg))
    cal = single_track(out.left, config, phone=out.phone)
    uncal = single_track(out.left, config, phone=out.phone,
                         no_calibration=True)
    err_cal = heading_error(cal.heading, out.truth_t, out.truth_heading)
    err_uncal = heading_error(uncal.heading, out.truth_t, out.truth_heading)
    return {"calibrated": err_cal.mean_abs_error_deg,
            "uncalibrated": err_uncal.mean_abs_error_deg}


def run_seeded(fn, seeds, parallel=True, **kwargs):
    """Run fn(seed, **kwargs) for every seed, optionally across processes.

    Results come back in seed order regardless of completion order.
    """
    seeds = list(seeds)
    if not parallel or len(seeds) < 2:
        return [fn(s, **kwargs) for s in seeds]
    with ProcessPoolExecutor() as pool:
        futures = [pool.submit(fn, s, **kwargs) for s in seeds]
        return [f.result() for f in futures]
