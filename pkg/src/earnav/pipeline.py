"""End-to-end tracking pipelines.

Single device: apply accelerometer calibration, estimate tilt at
stationary windows (zero-order hold in between), compute the
tilt-compensated magnetic heading with the rolling-window offset, anchor
the integrated gyro heading to it at stationary windows, blend per the
configured method, detect strides and integrate the planar track.

Two devices: run the single-device heading pipeline per earable, fuse
headings with the particle filter, average stride times across devices,
integrate with the fused heading, then optionally correct with the
GPS positional particle filter.
"""

from dataclasses import dataclass, fields, replace

import numpy as np

from .angles import interp_circular, wrap_angle
from .calibration import (AccelCalib, GyroCalib, MagCalibState,
                          calibrate_gyro, mag_add_reference_point,
                          mag_check_rollover, stationary_windows)
from .datamodel import DeviceTrace
from .displacement import (Track, detect_strides, integrate_track,
                           per_timestamp_distance, stride_length)
from .fusion import (average_stride_times, fuse_headings,
                     gps_position_filter, strides_from_peak_times)
from .heading import (HeadingSeries, attitude_from_tilt,
                      complementary_heading, integrate_gyro,
                      madgwick_heading, mag_heading_series, tilt_angles)
from .trace_io import interp_to_grid

METHODS = ("mag", "gyro", "complementary", "madgwick")


@dataclass(frozen=True)
class CalibrationSet:
    """Fitted calibration parameters handed from `calibrate` to `track`."""

    accel: AccelCalib
    gyro: GyroCalib | None = None
    mag_state: MagCalibState | None = None
    accel_residual_rms: float | None = None

    @classmethod
    def identity(cls):
        return cls(accel=AccelCalib.identity())


def save_calibration(calset, path):
    lines = []
    a = calset.accel
    for name, value in (("alpha_yx", a.alpha_yx), ("alpha_zx", a.alpha_zx),
                        ("alpha_zy", a.alpha_zy),
                        ("sf_ax", a.sf[0]), ("sf_ay", a.sf[1]),
                        ("sf_az", a.sf[2]),
                        ("b_ax", a.bias[0]), ("b_ay", a.bias[1]),
                        ("b_az", a.bias[2])):
        lines.append(f"{name}={float(value)!r}")
    if calset.accel_residual_rms is not None:
        lines.append(
            f"accel_residual_rms={float(calset.accel_residual_rms)!r}")
    if calset.gyro is not None:
        lines.append(f"gyro_offset_deg="
                     f"{float(np.degrees(calset.gyro.heading_offset))!r}")
        lines.append(
            f"gyro_calibrated_at={float(calset.gyro.calibrated_at)!r}")
    if calset.mag_state is not None:
        st = calset.mag_state
        lines.append(f"mag_current_offset_deg="
                     f"{float(np.degrees(st.current_offset))!r}")
        lines.append(f"mag_last_point_time={float(st.last_point_time)!r}")
        for k, (tp, off) in enumerate(st.window):
            lines.append(f"mag_point_{k}_t={float(tp)!r}")
            lines.append(
                f"mag_point_{k}_offset_deg={float(np.degrees(off))!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_calibration(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh.read().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, raw = line.partition("=")
            values[key.strip()] = float(raw)
    accel = AccelCalib(
        alpha_yx=values.pop("alpha_yx", 0.0),
        alpha_zx=values.pop("alpha_zx", 0.0),
        alpha_zy=values.pop("alpha_zy", 0.0),
        sf=(values.pop("sf_ax", 1.0), values.pop("sf_ay", 1.0),
            values.pop("sf_az", 1.0)),
        bias=(values.pop("b_ax", 0.0), values.pop("b_ay", 0.0),
              values.pop("b_az", 0.0)))
    gyro = None
    if "gyro_offset_deg" in values:
        gyro = GyroCalib(
            heading_offset=wrap_angle(
                np.radians(values.pop("gyro_offset_deg"))),
            calibrated_at=values.pop("gyro_calibrated_at", 0.0))
    mag_state = None
    if "mag_current_offset_deg" in values:
        window = []
        k = 0
        while f"mag_point_{k}_t" in values:
            window.append((values.pop(f"mag_point_{k}_t"),
                           wrap_angle(np.radians(
                               values.pop(f"mag_point_{k}_offset_deg")))))
            k += 1
        mag_state = MagCalibState(
            window=tuple(window),
            current_offset=wrap_angle(
                np.radians(values.pop("mag_current_offset_deg"))),
            last_point_time=values.pop("mag_last_point_time", -np.inf))
    rms = values.pop("accel_residual_rms", None)
    if values:
        raise ValueError(f"unknown calibration keys: {sorted(values)}")
    return CalibrationSet(accel=accel, gyro=gyro, mag_state=mag_state,
                          accel_residual_rms=rms)


def tilt_series(trace, config):
    """Per-sample (phi, theta), computed at stationary windows and held."""
    windows = stationary_windows(trace.t, trace.acc,
                                 tol=config.stationary_tol_ms2,
                                 min_duration=config.stationary_window_s)
    if not windows:
        raise ValueError("no stationary window found in trace")
    tilts = np.empty((len(trace), 2))
    first = tilt_angles(trace.acc[windows[0][0]:windows[0][1]].mean(axis=0))
    tilts[:] = first
    for i0, i1 in windows:
        tilt = tilt_angles(trace.acc[i0:i1].mean(axis=0))
        tilts[i0:] = tilt
    return tilts


def mag_offset_series(t, raw_psi, phone, config, enabled=True):
    """Rolling-window magnetometer offset per timestamp.

    Reference points are sampled from the phone's reference-heading
    channel at multiples of the calibration period; rollovers of the raw
    earable heading reset the window to its newest point.
    """
    state = MagCalibState(cap=config.mag_window_cap,
                          period=config.mag_calib_period_s)
    offsets = np.zeros(t.size)
    have_phone = (enabled and phone is not None
                  and phone.ref_heading is not None)
    next_ref = t[0]
    for k in range(t.size):
        if k > 0:
            state = mag_check_rollover(state, raw_psi[k - 1], raw_psi[k])
        if have_phone and t[k] + 1e-9 >= next_ref:
            ph = interp_circular(t[k], phone.t, phone.ref_heading)
            state = mag_add_reference_point(state, t[k], ph, raw_psi[k])
            next_ref += config.mag_calib_period_s
        offsets[k] = state.current_offset
    return offsets, state


def gyro_heading(trace, tilts, mag_psi, config):
    """Integrated-gyro heading anchored to the magnetic heading.

    The heading offset is re-estimated at every stationary window (or
    frozen after the first when gyro_recalibrate is off).
    """
    q0 = attitude_from_tilt(tilts[0, 0], tilts[0, 1])
    raw = integrate_gyro(trace, q0)
    windows = stationary_windows(trace.t, trace.acc,
                                 tol=config.stationary_tol_ms2,
                                 min_duration=config.stationary_window_s)
    if not windows:
        raise ValueError("no stationary window found in trace")
    if not config.gyro_recalibrate:
        windows = windows[:1]
    offsets = np.empty(len(trace))
    first = None
    for i0, i1 in windows:
        calib = calibrate_gyro(trace.t[i0:i1], trace.acc[i0:i1],
                               raw.psi[i0:i1], mag_psi[i0:i1],
                               tol=config.stationary_tol_ms2,
                               min_duration=0.0)
        if first is None:
            first = calib.heading_offset
        offsets[i0:] = calib.heading_offset
    offsets[:windows[0][0]] = first
    return HeadingSeries(t=trace.t, psi=wrap_angle(raw.psi + offsets),
                         method="gyro")


@dataclass(frozen=True)
class PipelineResult:
    track: Track
    heading: HeadingSeries
    mag_heading: HeadingSeries
    strides: tuple
    mag_state: MagCalibState
    distance: np.ndarray


def heading_pipeline(trace, config, phone=None, calset=None,
                     method="complementary", no_calibration=False):
    """Calibration + heading stages shared by single and fused tracking."""
    if method not in METHODS:
        raise ValueError(f"invalid method {method!r}; supported:"
                         f" {', '.join(METHODS)}")
    calset = calset or CalibrationSet.identity()
    acc = trace.acc if no_calibration else calset.accel.apply(trace.acc)
    cal_trace = trace.replace(acc=acc)

    tilts = tilt_series(cal_trace, config)
    raw_mag = mag_heading_series(cal_trace, tilts)
    offsets, mag_state = mag_offset_series(
        cal_trace.t, raw_mag.psi, phone, config, enabled=not no_calibration)
    mag_series = HeadingSeries(t=cal_trace.t,
                               psi=wrap_angle(raw_mag.psi + offsets),
                               method="mag", tilt=tilts)

    if method == "mag":
        series = mag_series
    elif method == "madgwick":
        series = madgwick_heading(cal_trace, gain=config.madgwick_gain)
    else:
        gyro_series = gyro_heading(cal_trace, tilts, mag_series.psi, config)
        if method == "gyro":
            series = gyro_series
        else:
            series = complementary_heading(
                gyro_series, mag_series, alpha0=config.alpha0,
                alpha_slope=config.alpha_slope_per_s)
    return cal_trace, series, mag_series, mag_state


def single_track(trace, config, phone=None, calset=None,
                 method="complementary", no_calibration=False):
    """Full single-device pipeline: calibration, heading, PDR track."""
    cal_trace, series, mag_series, mag_state = heading_pipeline(
        trace, config, phone=phone, calset=calset, method=method,
        no_calibration=no_calibration)
    norm = np.linalg.norm(cal_trace.acc, axis=1)
    strides = detect_strides(norm, cal_trace.rate_hz,
                             config.stride_prominence,
                             cutoff_hz=config.lowpass_cutoff_hz,
                             t0=cal_trace.t[0])
    d = per_timestamp_distance(strides, len(cal_trace),
                               stride_length(config.user_height_m))
    track = integrate_track(d, series, strides)
    return PipelineResult(track=track, heading=series,
                          mag_heading=mag_series, strides=tuple(strides),
                          mag_state=mag_state, distance=d)


def fused_track(left, right, config, phone=None, calset_left=None,
                calset_right=None, gps_fixes=None, method="complementary",
                no_calibration=False, seed=None):
    """Two-device pipeline: per-device headings, particle-filter fusion,
    averaged stride times, optional GPS correction."""
    if right is None:
        raise ValueError("fused tracking requires two traces")
    if len(left) != len(right) or not np.allclose(left.t, right.t,
                                                  atol=1e-9):
        raise ValueError("left and right traces are not on the same grid;"
                         " resample first (see run_mixed_rate)")
    seed = config.seed if seed is None else seed

    results = []
    for trace, calset in ((left, calset_left), (right, calset_right)):
        cal_trace, series, _, _ = heading_pipeline(
            trace, config, phone=phone, calset=calset, method=method,
            no_calibration=no_calibration)
        norm = np.linalg.norm(cal_trace.acc, axis=1)
        strides = detect_strides(norm, cal_trace.rate_hz,
                                 config.stride_prominence,
                                 cutoff_hz=config.lowpass_cutoff_hz,
                                 t0=cal_trace.t[0])
        results.append((series, strides))

    fused_psi = fuse_headings(
        results[0][0], results[1][0],
        n_particles=config.heading_particles,
        process_noise=np.radians(config.heading_process_noise_deg),
        meas_noise=np.radians(config.heading_meas_noise_deg),
        seed=seed)

    merged_times = average_stride_times(results[0][1], results[1][1],
                                        match_factor=config.stride_match_factor)
    strides = strides_from_peak_times(merged_times, left.t)
    d = per_timestamp_distance(strides, len(left),
                               stride_length(config.user_height_m))
    track = integrate_track(d, fused_psi, strides)
    if gps_fixes:
        track = gps_position_filter(track, gps_fixes,
                                    n_particles=config.position_particles,
                                    process_noise=config.dr_process_noise_m,
                                    seed=seed)
    return PipelineResult(track=track, heading=fused_psi,
                          mag_heading=results[0][0], strides=tuple(strides),
                          mag_state=MagCalibState(), distance=d)


def run_mixed_rate(left, right, config, **kwargs):
    """Fuse a full-rate left device with a lower-rate right device.

    The right trace is linearly interpolated onto the left grid before
    the standard fused pipeline runs.
    """
    if right.rate_hz > left.rate_hz + 1e-9:
        raise ValueError("right device rate exceeds the full-rate device")
    right_on_grid = interp_to_grid(right, left.t, left.rate_hz)
    return fused_track(left, right_on_grid, config, **kwargs)
