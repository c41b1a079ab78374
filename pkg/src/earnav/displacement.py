"""Stride detection and planar track integration.

Stride detection low-passes the accelerometer norm with a zero-phase
second-order critically-damped filter (3 Hz cutoff by default), keeps
local maxima whose topographic prominence exceeds a threshold, and tiles
time into stride spans bounded by midpoints between consecutive peaks.
Each span receives stride_length / span_size meters per timestamp, and
the track is the running sum of d_t * (cos psi_t, sin psi_t).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import signal
from scipy.integrate import cumulative_trapezoid

from .datamodel import Position2D

STRIDE_LENGTH_FACTOR = 0.43


@dataclass(frozen=True)
class StrideEvent:
    """One detected stride: filtered-norm peak plus its time span."""

    peak_time: float
    span: tuple  # (i, j) timestamp indices, i < j
    prominence: float

    def __post_init__(self):
        i, j = self.span
        if not i < j:
            raise ValueError("stride span must satisfy i < j")


@dataclass(frozen=True)
class Track:
    """Ordered planar positions plus the stride events that built them."""

    t: np.ndarray
    xy: np.ndarray  # (n, 2) meters east/north
    strides: tuple = ()

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        xy = np.asarray(self.xy, dtype=float)
        if xy.shape != (t.size, 2):
            raise ValueError("xy must have shape (n, 2)")
        if not np.all(np.isfinite(xy)):
            raise ValueError("non-finite position")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "xy", xy)
        object.__setattr__(self, "strides", tuple(self.strides))

    def __len__(self):
        return self.t.size

    @property
    def duration(self):
        return float(self.t[-1] - self.t[0])

    @property
    def final_position(self):
        return Position2D(float(self.xy[-1, 0]), float(self.xy[-1, 1]))


def critically_damped_lowpass(x, fs, cutoff):
    """Zero-phase second-order critically-damped low-pass.

    The analog prototype is 1 / (1 + s/w0)^2 with w0 = 2*pi*cutoff,
    discretized by a prewarped bilinear transform and applied
    forward-backward so peak times are not phase-shifted.
    """
    if fs <= 2.0 * cutoff:
        raise ValueError(f"sampling rate {fs} Hz too low for a"
                         f" {cutoff} Hz cutoff")
    w0 = 2.0 * np.pi * cutoff
    b, a = signal.bilinear([w0 * w0], [1.0, 2.0 * w0, w0 * w0], fs=fs)
    padlen = min(len(x) - 1, 3 * max(len(a), len(b)))
    return signal.filtfilt(b, a, x, padlen=padlen)


def detect_strides(accel_norm, fs, prominence_threshold, cutoff_hz=3.0,
                   t0=0.0):
    """Detect strides on an accelerometer-norm series.

    Returns StrideEvents whose spans tile the series: the first span
    starts at index 0, interior boundaries sit midway between
    consecutive accepted peaks, and the last span ends at the series
    end.
    """
    accel_norm = np.asarray(accel_norm, dtype=float)
    filtered = critically_damped_lowpass(accel_norm, fs, cutoff_hz)
    peaks, props = signal.find_peaks(filtered,
                                     prominence=prominence_threshold)
    if peaks.size == 0:
        return []
    n = accel_norm.size
    bounds = np.concatenate(([0],
                             (peaks[:-1] + peaks[1:]) // 2,
                             [n]))
    return [StrideEvent(peak_time=t0 + peaks[k] / fs,
                        span=(int(bounds[k]), int(bounds[k + 1])),
                        prominence=float(props["prominences"][k]))
            for k in range(peaks.size)]


def stride_length(height):
    """Constant stride length from user height."""
    return STRIDE_LENGTH_FACTOR * height


def per_timestamp_distance(strides, n_timestamps, stride_len):
    """Spread each stride's length uniformly over its span.

    Every timestamp inside span [i, j) receives stride_len / (j - i);
    timestamps outside all spans get zero. Total distance is exactly
    len(strides) * stride_len.
    """
    d = np.zeros(n_timestamps)
    claimed = np.zeros(n_timestamps, dtype=bool)
    for ev in strides:
        i, j = ev.span
        if j > n_timestamps:
            raise ValueError("stride span exceeds series length")
        if np.any(claimed[i:j]):
            raise ValueError("overlapping stride spans")
        claimed[i:j] = True
        d[i:j] = stride_len / (j - i)
    return d


def integrate_track(distance, heading_series, strides=()):
    """Cumulative planar track from per-timestamp distance and heading."""
    distance = np.asarray(distance, dtype=float)
    if distance.size != len(heading_series):
        raise ValueError("distance and heading series are misaligned")
    psi = heading_series.psi
    xy = np.column_stack([np.cumsum(distance * np.cos(psi)),
                          np.cumsum(distance * np.sin(psi))])
    return Track(t=heading_series.t, xy=xy, strides=tuple(strides))


def kinematics_track(t, acc_world):
    """Double-integration baseline: velocity is maintained over time.

    acc_world is an (n, 2) planar, gravity-removed acceleration in the
    world frame; velocity and position come from trapezoidal
    integration with no per-step zero-velocity reset, so a constant
    bias b produces the classic 0.5 * b * T^2 position drift.
    """
    t = np.asarray(t, dtype=float)
    acc_world = np.asarray(acc_world, dtype=float)
    vel = cumulative_trapezoid(acc_world, t, axis=0, initial=0.0)
    pos = cumulative_trapezoid(vel, t, axis=0, initial=0.0)
    return Track(t=t, xy=pos)
